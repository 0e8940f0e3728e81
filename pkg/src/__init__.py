"""SLOCC MBQC Lab

Measurement-based quantum computation on cluster states transformed by
invertible local operators.
"""

__version__ = "1.0.0"
