"""Finite cube geometry in Z^d with an implied zero exterior.

The cube of side N holds N^d sites, indexed row-major (axis 0 slowest).
Exterior neighbors are never materialized as sites: each site carries the
count of bonds leaving the cube, and the field value beyond the cube is
fixed at height 0.
"""

import numpy as np

from .errors import ParameterError


class Lattice:
    """Sites, bonds and boundary structure of an N^d cube.

    Attributes
    ----------
    d, N : int
        Dimension (1-3) and side length.
    n_sites : int
        N**d.
    coords : (n_sites, d) int array
        Coordinates of each site, row-major order.
    nbr : (n_sites, 2d) int array
        Neighbor site indices; bonds leaving the cube hold the sentinel
        value ``n_sites`` (use it to index a height array padded with one
        trailing zero).
    outside_count : (n_sites,) int array
        Number of bonds from each site to the exterior.
    bonds : (n_bonds, 2) int array
        Every interior bond exactly once.
    color : (n_sites,) int array
        Checkerboard color (coordinate-sum parity).

    Immutable after construction; safe to share between chains.
    """

    def __init__(self, d, N):
        if d not in (1, 2, 3):
            raise ParameterError(f"dimension must be 1, 2 or 3, got {d!r}")
        if not isinstance(N, (int, np.integer)) or N < 1:
            raise ParameterError(f"side length must be an integer >= 1, got {N!r}")
        self.d = int(d)
        self.N = int(N)
        self.shape = (self.N,) * self.d
        self.n_sites = self.N**self.d

        coords = np.indices(self.shape).reshape(self.d, -1).T
        self.coords = coords

        nbr = np.full((self.n_sites, 2 * self.d), self.n_sites, dtype=np.int64)
        bond_a, bond_b = [], []
        k = 0
        for ax in range(self.d):
            for step in (-1, +1):
                shifted = coords[:, ax] + step
                ok = (shifted >= 0) & (shifted < self.N)
                c2 = coords[ok].copy()
                c2[:, ax] += step
                nbr[ok, k] = np.ravel_multi_index(c2.T, self.shape)
                k += 1
                if step == +1:
                    sites = np.nonzero(ok)[0]
                    bond_a.append(sites)
                    bond_b.append(nbr[sites, k - 1])
        self.nbr = nbr
        self.outside_count = (nbr == self.n_sites).sum(axis=1).astype(np.int64)
        if bond_a:
            self.bonds = np.stack(
                [np.concatenate(bond_a), np.concatenate(bond_b)], axis=1
            )
        else:
            self.bonds = np.empty((0, 2), dtype=np.int64)
        self.color = (coords.sum(axis=1) % 2).astype(np.int64)

    def boundary_sites(self):
        """Indices of sites with at least one bond to the exterior."""
        return np.nonzero(self.outside_count > 0)[0]

    @property
    def n_boundary(self):
        return int((self.outside_count > 0).sum())

    @property
    def n_outside_bonds(self):
        return int(self.outside_count.sum())

    @property
    def center_site(self):
        return int(np.ravel_multi_index((self.N // 2,) * self.d, self.shape))

    def snake_path(self):
        """A self-avoiding nearest-neighbor path covering every site.

        Boustrophedon order: the fastest axis sweeps back and forth, each
        slower axis reverses the whole block it encloses. The path starts
        at the origin corner, which lies on the boundary, so consecutive
        sites are always lattice neighbors.
        """
        order = [(i,) for i in range(self.N)]
        for _ in range(self.d - 1):
            nxt = []
            for i in range(self.N):
                block = order if i % 2 == 0 else order[::-1]
                nxt.extend((i,) + t for t in block)
            order = nxt
        return np.array(
            [np.ravel_multi_index(t, self.shape) for t in order], dtype=np.int64
        )

    def padded(self, heights, fill=0.0):
        """Heights with one trailing entry so nbr's sentinel reads `fill`."""
        return np.append(np.asarray(heights, dtype=float), fill)

    def __repr__(self):
        return f"Lattice(d={self.d}, N={self.N})"


def build_lattice(d, N):
    """Construct the N^d cube (deterministic row-major indexing)."""
    return Lattice(d, N)


def boundary_sites(lat):
    """Sites of the cube adjacent to the exterior."""
    return lat.boundary_sites()


def snake_path(lat):
    """Covering nearest-neighbor path starting on the boundary."""
    return lat.snake_path()
