"""gridob - verification toolkit for the obstruction complexes of toroidal grid diagrams."""

__version__ = "0.2.0"
