"""Shared builders for honest protocol runs."""

from expproof.config import LimeConfig
from expproof.numeric import FieldElement, quantize_array
from expproof.protocol import prove, setup



def honest_run(model, cfg: LimeConfig, rng, entropy=b"fixture"):
    """Set up, pick a random input and challenge, prove. Returns
    ``(state, bundle, x, r_v, o, e, cert)``."""
    state, bundle = setup(model, cfg, entropy)
    x = quantize_array(rng.normal(size=model.input_dim), cfg.scale)
    r_v = FieldElement(int(rng.integers(0, 2**62)) * 2**64 + int(rng.integers(0, 2**62)))
    o, e, cert = prove(state, x, r_v)
    return state, bundle, x, r_v, o, e, cert


CRITERIA: list = []


def record(number: int, ok: bool, name: str, detail: str) -> bool:
    """Log one acceptance line; printed again in the terminal summary."""
    CRITERIA.append((number, bool(ok), name, detail))
    print(f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return bool(ok)
