"""Tomographic image reconstruction with diffusion-based regularization.

Library layout:

* :mod:`nidtomo.grids`       pixel grids, inner products, difference operators
* :mod:`nidtomo.radon`       projector, adjoint, filtered backprojection
* :mod:`nidtomo.diffusion`   penalty/diffusion/flux families, smoothed gradients
* :mod:`nidtomo.functionals` regularized least-squares functionals and gradients
* :mod:`nidtomo.optimize`    descent solvers, line searches, iteration traces
* :mod:`nidtomo.phantom`     head phantom and calibrated noise
* :mod:`nidtomo.metrics`     SNR / PSNR / SSIM
* :mod:`nidtomo.config`      experiment configuration schema
* :mod:`nidtomo.pipeline`    experiment stages writing CSV/PGM plus figures
* :mod:`nidtomo.cli`         command-line driver
"""

__version__ = "0.1.0"
