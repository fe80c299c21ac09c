"""
Committing to a model and checking explanations
===============================================

A model owner commits to its weights once. Afterwards every query gets a
label, a top-5 LIME explanation and a certificate that the explanation was
computed honestly with the committed weights.
"""

import numpy as np

from expproof import LimeConfig
from expproof.protocol import prove, random_challenge, setup, verify
from expproof.model import synthesize_model
from expproof.numeric import quantize_array

# a small MLP standing in for the secret model: 14 inputs, two hidden layers of 16
model = synthesize_model({"kind": "mlp", "sizes": [14, 16, 16, 2]}, seed=0)
cfg = LimeConfig(border_lime=True, smpl_type="gaussian", krnl_type="exponential")

# offline: commit to the weights and to the prover's randomness r_p
state, bundle = setup(model, cfg)
print("published com_W:", bundle.com_W.hex()[:16], "...")
print("published com_r:", bundle.com_r.hex()[:16], "...")

# online: the user picks a query and a fresh challenge r_v
rng = np.random.default_rng(4)
x = quantize_array(rng.normal(size=14), cfg.scale)
r_v = random_challenge()

o, e, cert = prove(state, x, r_v)
print("\nlabel:", o)
for j, w in e.as_floats():
    print(f"  feature {j:2d}  weight {w:+.4f}")

report = verify(bundle, x, r_v, o, e, cert)
print("\nhonest certificate:", report.summary())

# the neighborhood was drawn from PRF(r_p + r_v), so the prover could not
# choose it. Flip one neighborhood label in the disclosed witness and the
# checker names the step that broke.
from dataclasses import replace

from expproof.protocol import BACKENDS, Certificate

wit = cert.witness
y = np.array(wit.y)
y[0] = 1 - y[0]
forged = Certificate(cert.stmt, BACKENDS["replay"].prove(cert.stmt, replace(wit, y=y)))
print("forged certificate: ", verify(bundle, x, r_v, o, e, forged).summary())

# a certificate is bound to the query it answers
print("replayed elsewhere: ", verify(bundle, x + 1, r_v, o, e, cert).summary())
