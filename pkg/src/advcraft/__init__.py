"""advcraft: craft adversarial images under a perceptual-distance budget
and measure how well they survive physical-world transforms.
"""

__version__ = "0.1.0"
