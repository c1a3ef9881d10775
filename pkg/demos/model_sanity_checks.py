"""
Checking the message-passing models
===================================

Three properties worth seeing with your own eyes: relabelling atoms does
not change a prediction, batching does not change a prediction, and the
hand-written gradients agree with finite differences.
"""

import numpy as np

from funqg.coarsen import funqg
from funqg.gradcheck import run_suite
from funqg.models import GraphBatch, ModelConfig, forward, init_params
from funqg.smiles import read_smiles

cfg = ModelConfig(architecture="dmpnn", hidden=32, steps=3)
store = init_params(cfg, seed=0)
graphs = [funqg(read_smiles(s)) for s in ["CCO", "c1ccccc1C(=O)O", "CC(C)CN", "ClCCCl"]]

###############################################################################
# Batched and one-at-a-time predictions agree to the last bit.
together = forward(GraphBatch(graphs), store, cfg).value
alone = np.vstack([forward(GraphBatch([g]), store, cfg).value for g in graphs])
print("batched == single:", np.array_equal(together, alone))

###############################################################################
# The same molecule written two ways gives the same prediction.
a = forward(GraphBatch([funqg(read_smiles("OC(=O)c1ccccc1"))]), store, cfg).value
b = forward(GraphBatch([funqg(read_smiles("c1ccccc1C(=O)O"))]), store, cfg).value
print("max difference between atom orderings:", float(np.abs(a - b).max()))

###############################################################################
# Finite-difference check on random small models and graph pairs.
results = run_suite(instances=5)
for r in results:
    print(r["architecture"], r["task"], f"{r['max_rel_error']:.2e}")
