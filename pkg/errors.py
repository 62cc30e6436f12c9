"""
Erreurs et avertissements du simulateur
"""


class TrackingError(Exception):
    """Erreur de base du projet"""


class NumericalError(TrackingError):
    """Échec numérique (code de sortie 2)"""


class NonPositiveDefiniteError(NumericalError):
    """La factorisation de Cholesky échoue même après ajout de jitter"""


class AllWeightsDegenerateError(NumericalError):
    """Tous les log-poids sont -inf ou NaN"""


class InvalidWeightsError(NumericalError):
    """Poids négatifs ou non normalisés"""


class EmptyInputError(TrackingError, ValueError):
    pass


class DimensionMismatchError(TrackingError, ValueError):
    pass


class OriginSingularityError(TrackingError, ValueError):
    """Position à l'origine: le gisement n'est pas défini"""


class LengthMismatchError(TrackingError, ValueError):
    pass


class StaleTransferPacketError(TrackingError):
    """Le paquet transféré ne correspond pas au pas de temps courant"""


class ConfigValidationError(TrackingError, ValueError):
    """Configuration invalide (code de sortie 1)"""


class DegenerateWeightsWarning(RuntimeWarning):
    """Poids dégénérés remplacés par des poids uniformes"""


class CovarianceJitterWarning(RuntimeWarning):
    """Jitter ajouté à la diagonale pour réussir Cholesky"""
