"""Verifiable LIME explanations over committed models."""

from .config import LimeConfig, load_config
from .crypto import Commitment, PrfKey, commit, prf_hash, uniform_samples, verify_commitment
from .lasso import Explanation, LassoSolution, certify_lasso, duality_gap, dual_feasible, top_k
from .lime import ExplainResult, explain, find_opposite_point
from .model import ModelWeights, infer, infer_batch, load_model, save_model, synthesize_model
from .numeric import FieldElement, FixedPoint, quantize, dequantize, fp_dot
from .protocol import Certificate, ProverError, PublicBundle, ProverState, prove, setup, verify
from .relation import CheckReport, Statement, Witness, check_relation, enumerate_tampers

__all__ = [
    "LimeConfig", "load_config",
    "Commitment", "PrfKey", "commit", "prf_hash", "uniform_samples", "verify_commitment",
    "Explanation", "LassoSolution", "certify_lasso", "duality_gap", "dual_feasible", "top_k",
    "ExplainResult", "explain", "find_opposite_point",
    "ModelWeights", "infer", "infer_batch", "load_model", "save_model", "synthesize_model",
    "FieldElement", "FixedPoint", "quantize", "dequantize", "fp_dot",
    "Certificate", "ProverError", "PublicBundle", "ProverState", "prove", "setup", "verify",
    "CheckReport", "Statement", "Witness", "check_relation", "enumerate_tampers",
]
