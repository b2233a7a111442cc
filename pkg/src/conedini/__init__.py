"""Conical defects and Dini functions of atomic measures, with Lipschitz graph extraction."""

from .annulus import (
    AnnulusRule,
    cardinality_bound,
    conservative_members,
    delta_star,
    hausdorff_constant,
    nabla_star,
    radius_r,
    radius_s,
    rule_for,
)
from .conefamily import ConeGrid, cone_grid
from .defect import DiniProfile, defect, dini_profile, dini_truncated, normalized_sum
from .dyadic import DyadicCube, cube_at
from .errors import ContractViolation, InputError
from .generators import gen_four_corner, gen_graph, gen_mixture, random_lipschitz_function
from .geometry import (
    Box,
    Cone,
    Incidence,
    Subspace,
    cube_meets_cone_union,
    dist_to_complement,
    dist_to_subspace,
    excess,
    gap,
    hausdorff,
    in_cone,
)
from .lipgraph import LipGraphPatch, extend, sample_graph, verify_cone_condition
from .measure import AtomicMeasure, load_measure, save_measure
from .pipeline import DecompositionReport, decompose, extract_graphs, integral_diagnostic
from .tree import (
    CubeTree,
    GoodBadPartition,
    bad_cubes,
    draw_graphs,
    equitable_shares,
    leaves,
    localize,
    redistribution_check,
)

__version__ = "0.1.0"
