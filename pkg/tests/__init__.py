"""Test suite for slocc-mbqc-lab."""
