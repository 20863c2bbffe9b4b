"""Physics-informed VAE with a partitioned latent space.

The latent vector splits into physics parameters ``z_x`` that feed a nominal
physics model, plus domain ``z_c`` and class ``z_y`` latents that drive a
learned correction. A gradient reversal layer between the latents and the
correction network sets how strongly ``z_c``/``z_y`` are discouraged from
carrying response information their supervision does not explain.

Three synthetic case studies ship with the package (``beam``, ``oscillator``,
``bridge``); see :mod:`dpivae.cases`.
"""

__version__ = "0.1.0"
