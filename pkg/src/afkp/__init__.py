"""Shifted Kronig-Penney box: exact spectra and Fermi-gas quench observables."""

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
