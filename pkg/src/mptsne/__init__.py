"""Joint t-SNE over private multi-party data.

Three networked roles (data-owning participants, a key-holding
collaborator S, and a noise-holding collaborator T) compute an exact
t-SNE embedding of the union of their datasets without exposing raw
data or the pairwise distance matrix to anyone.
"""

__version__ = "0.1.0"
