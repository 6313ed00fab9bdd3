"""meshscape: testbed monitoring portals over a simulated directory federation."""

__version__ = "0.1.0"
