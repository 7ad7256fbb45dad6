"""Few-shot portrait stylization with latent style mixing and identity-preserving fine-tuning."""

__version__ = "0.1.0"
