"""Low-observability distribution-system state estimation via decentralized
matrix completion.

The package is organized around the pipeline:

    gridmodel   network data, synthetic feeders, exact power-flow ground truth
    linflow     linear voltage model, area truncation, per-area linear maps
    datamatrix  multi-period measurement matrix, observation masks, selectors
    completion  factored completion objective and the proximal ADMM solvers
    certificate global-optimality certificate for converged factor pairs
    simnet      deterministic bulk-synchronous area-to-area message bus
    metrics     magnitude/angle/RMSE error reports with confidence intervals
    cli         experiment runner (``gridmc`` console script)
"""

__version__ = "0.1.0"
