"""Route choice models with overlap-induced correlation.

Modules:

- ``netgraph``: networks, routes and the built-in test networks.
- ``routegen``: efficient-route enumeration and sampled choice sets.
- ``mnp``: the probit target, with overlap covariances and Monte-Carlo probabilities.
- ``gev``: the MNL, link-nested logit and paired combinatorial logit models.
- ``gevcov``: GEV covariances by quadrature, and reduction to difference correlations.
- ``conl``: combination of nested logit.
- ``bench``: MSE grids and CSV output.
"""

__version__ = "0.1.0"
