"""Exact front tracking for a singular 1D diffusion with two preferred slopes."""
