"""
Coarsening a single molecule
============================

Parse a SMILES string, find its functional groups, and contract the
molecular graph into its quotient graph.
"""

from funqg.coarsen import compute_cut_edges, components_partition, funqg
from funqg.featurizer import featurize
from funqg.functional_groups import functional_groups
from funqg.smiles import read_smiles

# ethyl 4-aminobenzoate (benzocaine)
smiles = "CCOC(=O)c1ccc(N)cc1"
m = read_smiles(smiles)
print(smiles, "->", m.num_atoms, "heavy atoms")

###############################################################################
# Functional groups are connected sets of marked atoms.
groups = functional_groups(m)
for fg in groups:
    print("group", fg.sorted(), [m.atoms[i].element for i in fg.sorted()])

###############################################################################
# Cutting every bond that touches a group boundary leaves the blocks of the
# partition: each group is a block, and the carbon skeleton falls apart
# into the remaining pieces.
g = featurize(m)
cut = compute_cut_edges(g, groups)
blocks = components_partition(g, cut, groups)
for block, kind in zip(blocks.blocks, blocks.kinds):
    print(kind, sorted(block))

###############################################################################
# One node per block, one edge wherever a bond joined two blocks.
q = funqg(m, g)
print("quotient:", q.num_nodes, "nodes,", len(q.edges), "edges")
print("edges:", q.edges.tolist())
print("node feature width:", q.node_features.shape[1])
