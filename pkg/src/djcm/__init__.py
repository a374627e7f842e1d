"""Double Jaynes-Cummings dynamics with squeezed coherent thermal fields."""

__version__ = "0.1.0"
