"""Latent operator flow matching for conditional spatiotemporal field generation."""
