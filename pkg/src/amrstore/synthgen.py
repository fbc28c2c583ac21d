"""Synthetic meshes, domain decomposition and reassembly.

generate_global builds a mesh over the unit box: everything refines up
to level_min, a rule (a spherical shell band or a seeded coin flip)
drives refinement up to level_max, and five smooth radial fields are
evaluated at leaf centers then averaged bottom-up onto coarse nodes.

decompose orders the leaves along a space-filling curve, cuts the order
into near-equal contiguous intervals, one per domain, and builds each
domain's tree: the branches to its own leaves, every sibling of a
retained refined node, and optionally the whole coarse skeleton down to
a chosen level. assemble is the inverse, merging domain trees back into
one global tree and checking that owners agree along the way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import CURVES, curve_keys
from .errors import (
    InconsistentDomains,
    InvalidGenSpec,
    OwnershipConflict,
    TooManyDomains,
)
from .tree import (
    AmrTree,
    DomainTree,
    GlobalTree,
    build_tree,
    lattice_origins,
    node_levels,
    propagate_any_up,
    propagate_mean_up,
)

FIELD_NAMES = ("density", "pressure", "vx", "vy", "vz")
MAX_LEVEL = 12

# Radial profile parameters when the refinement rule has none of its own.
_DEFAULT_R0 = 0.35
_DEFAULT_WIDTH = 0.1


@dataclass(frozen=True)
class ShellRule:
    """Refine cells whose box intersects the band |x - center| within r0 +- width/2."""

    r0: float
    width: float


@dataclass(frozen=True)
class RandomRule:
    """Refine each eligible cell with probability p_refine, from a seeded stream."""

    p_refine: float
    seed: int


@dataclass(frozen=True)
class GenSpec:
    dim: int
    level_min: int
    level_max: int
    rule: ShellRule | RandomRule
    fields: tuple[str, ...] = FIELD_NAMES


@dataclass(frozen=True)
class GhostPolicy:
    """How much ghost context each domain keeps besides its own branches.

    minimal retains only siblings forced by tree completeness;
    coarse_skeleton(G) additionally retains every global node at levels
    <= G together with its children.
    """

    mode: str
    level: int = -1

    @classmethod
    def minimal(cls) -> "GhostPolicy":
        return cls(mode="minimal")

    @classmethod
    def coarse_skeleton(cls, level: int) -> "GhostPolicy":
        if level < 0:
            raise ValueError(f"skeleton level must be >= 0, got {level}")
        return cls(mode="coarse_skeleton", level=level)


def _validate_spec(spec: GenSpec) -> None:
    if spec.dim not in (1, 2, 3):
        raise InvalidGenSpec(f"dim must be 1, 2 or 3, got {spec.dim!r}")
    if not 0 <= spec.level_min <= spec.level_max <= MAX_LEVEL:
        raise InvalidGenSpec(
            f"need 0 <= level_min <= level_max <= {MAX_LEVEL}, "
            f"got {spec.level_min}..{spec.level_max}"
        )
    if isinstance(spec.rule, ShellRule):
        if not (0.0 < spec.rule.r0 < 1.0 and 0.0 < spec.rule.width < 1.0):
            raise InvalidGenSpec(f"shell parameters must lie in (0, 1), got {spec.rule}")
    elif isinstance(spec.rule, RandomRule):
        if not 0.0 <= spec.rule.p_refine <= 1.0:
            raise InvalidGenSpec(f"p_refine must lie in [0, 1], got {spec.rule.p_refine}")
    else:
        raise InvalidGenSpec(f"unknown refinement rule {spec.rule!r}")
    unknown = set(spec.fields) - set(FIELD_NAMES)
    if unknown:
        raise InvalidGenSpec(f"unknown fields {sorted(unknown)}, pick from {FIELD_NAMES}")
    if len(spec.fields) != len(set(spec.fields)):
        raise InvalidGenSpec(f"duplicate field names in {spec.fields}")


def _shell_intersects(origins: np.ndarray, size: float, r0: float, width: float) -> np.ndarray:
    """Box-vs-shell test; origins is (n, dim), boxes are [o, o+size) per axis."""
    lo_gap = origins - 0.5
    hi_gap = 0.5 - (origins + size)
    dmin_ax = np.maximum(np.maximum(lo_gap, hi_gap), 0.0)
    dmax_ax = np.maximum(np.abs(lo_gap), np.abs(origins + size - 0.5))
    dmin = np.sqrt((dmin_ax**2).sum(axis=1))
    dmax = np.sqrt((dmax_ax**2).sum(axis=1))
    return (dmin <= r0 + width / 2) & (dmax >= r0 - width / 2)


def generate_global(spec: GenSpec) -> GlobalTree:
    """Deterministic synthetic mesh; equal specs give bit-identical results."""
    _validate_spec(spec)
    dim = spec.dim
    nch = 1 << dim
    rng = np.random.default_rng(spec.rule.seed) if isinstance(spec.rule, RandomRule) else None

    ranks = np.arange(nch, dtype=np.float64)
    offsets = np.stack(
        [(ranks.astype(np.int64) >> ax) & 1 for ax in range(dim)], axis=1
    ).astype(np.float64)

    flags_parts = []
    level_origins = np.zeros((1, dim), dtype=np.float64)
    level = 0
    while True:
        size = 2.0 ** -level
        count = len(level_origins)
        if level >= spec.level_max:
            flags = np.zeros(count, dtype=bool)
        elif level < spec.level_min:
            flags = np.ones(count, dtype=bool)
        elif isinstance(spec.rule, ShellRule):
            flags = _shell_intersects(level_origins, size, spec.rule.r0, spec.rule.width)
        else:
            flags = rng.random(count) < spec.rule.p_refine
        flags_parts.append(flags)
        if not flags.any():
            break
        refined = level_origins[flags]
        level_origins = (
            np.repeat(refined, nch, axis=0) + np.tile(offsets, (refined.shape[0], 1)) * (size / 2)
        )
        level += 1

    tree = build_tree(dim, np.concatenate(flags_parts))
    fields = {name: _field_values(tree, spec, name) for name in spec.fields}
    leaf_owner = np.where(tree.refinement, -1, 0)
    return GlobalTree(tree=tree, leaf_owner=leaf_owner, fields=fields)


def _field_values(tree: AmrTree, spec: GenSpec, name: str) -> np.ndarray:
    """Smooth radial profile at every cell center, then means bottom-up.

    All profiles stay inside [1, 2): one shared exponent keeps father-son
    bit patterns close, which is what the delta codec feeds on.
    """
    if isinstance(spec.rule, ShellRule):
        r0, width = spec.rule.r0, spec.rule.width
    else:
        r0, width = _DEFAULT_R0, _DEFAULT_WIDTH
    centers = _centers(tree)
    r = np.sqrt(((centers - 0.5) ** 2).sum(axis=1))
    bump = np.exp(-(((r - r0) / width) ** 2))
    if name == "density":
        vals = 1.0 + 0.75 * bump
    elif name == "pressure":
        vals = 1.0 + 0.5 * bump * bump
    elif name in ("vx", "vy", "vz"):
        ax = ("vx", "vy", "vz").index(name)
        component = centers[:, ax] - 0.5 if ax < tree.dim else np.zeros(len(centers))
        vals = 1.5 + 0.5 * component * bump
    else:  # pragma: no cover - guarded by _validate_spec
        raise InvalidGenSpec(f"unknown field {name!r}")
    return propagate_mean_up(tree, vals)


def _centers(tree: AmrTree) -> np.ndarray:
    lat = lattice_origins(tree).astype(np.float64)
    sizes = np.ldexp(1.0, -node_levels(tree))
    return (lat + 0.5) * sizes[:, None]


def _leaf_partition(g: GlobalTree, n_domains: int, curve: str):
    """Owner id per leaf: curve-sort the leaves, cut into contiguous runs."""
    tree = g.tree
    leaves = np.flatnonzero(~tree.refinement)
    if not 1 <= n_domains <= leaves.size:
        raise TooManyDomains(f"{n_domains} domains for {leaves.size} leaves")
    bits = max(tree.depth, 1)
    levels = node_levels(tree)[leaves]
    lat = lattice_origins(tree)[leaves]
    # Center of each leaf on the deepest lattice; distinct leaves land on
    # distinct points because each box contains its own center.
    shift = bits - levels
    centers = (lat << shift[:, None]) + np.where(shift > 0, 1 << np.maximum(shift - 1, 0), 0)[:, None]
    keys = curve_keys(centers, bits, curve)
    order = np.argsort(keys, kind="stable")
    base, rem = divmod(leaves.size, n_domains)
    sizes = np.full(n_domains, base, dtype=np.int64)
    sizes[:rem] += 1
    owner_sorted = np.repeat(np.arange(n_domains, dtype=np.int64), sizes)
    owner_per_leaf = np.empty(leaves.size, dtype=np.int64)
    owner_per_leaf[order] = owner_sorted
    return leaves, owner_per_leaf


def assign_owners(g: GlobalTree, n_domains: int, curve: str = "hilbert") -> GlobalTree:
    """The global tree with leaf owners relabeled by the curve partition."""
    leaves, owner_per_leaf = _leaf_partition(g, n_domains, curve)
    leaf_owner = np.full(g.tree.node_count, -1, dtype=np.int64)
    leaf_owner[leaves] = owner_per_leaf
    return GlobalTree(tree=g.tree, leaf_owner=leaf_owner, fields=g.fields)


def decompose(g: GlobalTree, n_domains: int, curve: str = "hilbert",
              ghosts: GhostPolicy = GhostPolicy.minimal()) -> list[DomainTree]:
    """Split a global tree into per-domain trees along a space-filling curve.

    Interval sizes differ by at most one leaf. Every returned domain
    passes validate_domain; reassembling them recovers the input exactly
    (with owners as assign_owners labels them).
    """
    tree = g.tree
    if ghosts.mode not in ("minimal", "coarse_skeleton"):
        raise ValueError(f"unknown ghost policy {ghosts.mode!r}")
    if ghosts.mode == "coarse_skeleton" and ghosts.level > tree.depth:
        raise ValueError(
            f"skeleton level {ghosts.level} exceeds the tree depth {tree.depth}"
        )
    leaves, owner_per_leaf = _leaf_partition(g, n_domains, curve)
    levels = node_levels(tree)
    skeleton_cut = ghosts.level if ghosts.mode == "coarse_skeleton" else -1
    in_skeleton = levels <= skeleton_cut

    nch = tree.n_children
    goff = tree._group_level_offsets
    domains = []
    for d in range(n_domains):
        owned = np.zeros(tree.node_count, dtype=bool)
        owned[leaves[owner_per_leaf == d]] = True
        owned = propagate_any_up(tree, owned)
        keeps_children = tree.refinement & (owned | in_skeleton)

        keep = np.zeros(tree.node_count, dtype=bool)
        keep[0] = True
        for L in range(tree.depth):
            g0, g1 = int(goff[L]), int(goff[L + 1])
            if g0 == g1:
                continue
            fathers = tree._refined_index[g0:g1]
            keep[1 + g0 * nch:1 + g1 * nch] = np.repeat(
                keep[fathers] & keeps_children[fathers], nch
            )

        domains.append(DomainTree(
            tree=build_tree(tree.dim, keeps_children[keep]),
            ownership=owned[keep],
            fields={name: vals[keep] for name, vals in g.fields.items()},
            domain_id=d,
        ))
    return domains


def assemble(domains) -> GlobalTree:
    """Merge domain trees back into one global tree.

    A node is refined iff some domain owning a descendant leaf under it
    says so; owners disagreeing raises InconsistentDomains, two owners on
    one leaf raises OwnershipConflict. Field values come from the first
    owning domain in input order.
    """
    domains = list(domains)
    if not domains:
        raise ValueError("nothing to assemble")
    dims = {dt.tree.dim for dt in domains}
    if len(dims) != 1:
        raise ValueError(f"mixed dimensionalities {sorted(dims)}")
    field_names = list(domains[0].fields)
    for dt in domains[1:]:
        if list(dt.fields) != field_names:
            raise InconsistentDomains("domains carry different field sets")
    dim = domains[0].tree.dim
    nch = 1 << dim
    D = len(domains)
    domain_ids = np.array([dt.domain_id for dt in domains], dtype=np.int64)

    maps = [np.zeros(1, dtype=np.int64) for _ in domains]  # assembled node -> local index
    ref_parts, owner_parts = [], []
    field_parts: dict[str, list[np.ndarray]] = {name: [] for name in field_names}
    level = 0
    while True:
        m = maps[0].size
        present = np.zeros((D, m), dtype=bool)
        ownm = np.zeros((D, m), dtype=bool)
        refm = np.zeros((D, m), dtype=bool)
        for di, dt in enumerate(domains):
            mp = maps[di]
            pm = mp >= 0
            present[di] = pm
            ownm[di, pm] = dt.ownership[mp[pm]]
            refm[di, pm] = dt.tree.refinement[mp[pm]]
        owners = present & ownm
        n_owners = owners.sum(axis=0)
        if (n_owners == 0).any():
            pos = int(np.flatnonzero(n_owners == 0)[0])
            raise InconsistentDomains(f"no domain owns node {pos} at level {level}")
        refined = (owners & refm).any(axis=0)
        disagree = owners & (refm != refined[None, :])
        if disagree.any():
            pos = int(np.flatnonzero(disagree.any(axis=0))[0])
            raise InconsistentDomains(
                f"owning domains disagree on refinement of node {pos} at level {level}"
            )
        multi = (~refined) & (n_owners > 1)
        if multi.any():
            pos = int(np.flatnonzero(multi)[0])
            claimants = domain_ids[owners[:, pos]]
            raise OwnershipConflict(
                f"leaf {pos} at level {level} owned by domains {claimants.tolist()}"
            )
        first_owner = owners.argmax(axis=0)
        ref_parts.append(refined)
        owner_parts.append(np.where(refined, -1, domain_ids[first_owner]))
        for name in field_names:
            vals = np.empty(m, dtype=np.float64)
            for di, dt in enumerate(domains):
                sel = first_owner == di
                if sel.any():
                    vals[sel] = dt.fields[name][maps[di][sel]]
            field_parts[name].append(vals)

        if not refined.any():
            break
        ridx = np.flatnonzero(refined)
        m_next = ridx.size * nch
        ranks = np.arange(nch, dtype=np.int64)
        new_maps = []
        for di, dt in enumerate(domains):
            mp = maps[di]
            nm = np.full(m_next, -1, dtype=np.int64)
            has = present[di, ridx] & refm[di, ridx]
            jj = np.flatnonzero(has)
            if jj.size:
                local = mp[ridx[jj]]
                starts = 1 + dt.tree._refined_rank[local] * nch
                nm[(jj[:, None] * nch + ranks).ravel()] = (starts[:, None] + ranks).ravel()
            new_maps.append(nm)
        maps = new_maps
        level += 1

    return GlobalTree(
        tree=build_tree(dim, np.concatenate(ref_parts)),
        leaf_owner=np.concatenate(owner_parts),
        fields={name: np.concatenate(parts) for name, parts in field_parts.items()},
    )
