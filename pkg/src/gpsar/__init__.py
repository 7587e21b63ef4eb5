"""Ground-penetrating circular SAR: simulation, trajectory fusion, refraction-aware focusing and detection."""

__version__ = "0.1.0"
