"""Fixed-step EMT simulator: black start of an offshore wind farm by a
grid-forming battery, with soft-charge energisation, sequential WT
synchronisation, block loading and island re-synchronisation."""

__version__ = "0.1.0"
