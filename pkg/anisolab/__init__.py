"""anisolab - Anisotropic p-Laplacian numerical laboratory"""
__version__ = "1.0.0"
