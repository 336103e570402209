"""VAE trainer for the drawing engine's encoder weights.

Trains a convolutional VAE on a corpus of 64x64 grayscale drawings and
exports the encoder half in the engine's weight container format, plus a
parity pack (sample images with their latents) so the consumer can
verify its own inference against the training stack.
"""

__version__ = "0.1.0"
