"""Model checking of size-indexed properties for periodic MPS families.

The pipeline: a family of periodic matrix product states is given by its
Kraus matrices; squared norms reduce to traces of transfer-matrix powers;
the transfer map is split into irreducible components whose peripheral
spectra are cyclic; evidence sets of chain-logic formulas are then
approximated from above and below by semilinear sets of sizes.
"""

from chaincheck.mps import KrausSet, MPSFamily, load_model, save_model
from chaincheck.semilinear import SemilinearSet, EvidenceApprox
from chaincheck.logic import ChainModel, Label, Interval, parse_formula, load_spec
from chaincheck.spectral import decompose, Decomposition, IrreducibleComponent
from chaincheck.checker import label_evidence, formula_evidence, verdict, asymptotic_verdict

__all__ = [
    "KrausSet",
    "MPSFamily",
    "load_model",
    "save_model",
    "SemilinearSet",
    "EvidenceApprox",
    "ChainModel",
    "Label",
    "Interval",
    "parse_formula",
    "load_spec",
    "decompose",
    "Decomposition",
    "IrreducibleComponent",
    "label_evidence",
    "formula_evidence",
    "verdict",
    "asymptotic_verdict",
]

__version__ = "0.1.0"
