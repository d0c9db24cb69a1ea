"""Physical constants and unit conversions used throughout the package."""

AMU = 1.66053906660e-27  # kg
E_CHARGE = 1.602176634e-19  # C

UM = 1e-6
MEV = 1e-3 * E_CHARGE  # J

YB171_MASS_U = 170.9363
