"""
LeadingOnes Query Lab
Query-counted black-box optimizers, unbiased operators and verification checks
for the hidden-permutation LeadingOnes class.
"""

__version__ = "0.1.0"
