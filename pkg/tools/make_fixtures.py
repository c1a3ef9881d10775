"""Regenerate the reference fixtures under tests/fixtures/.

Requires RDKit (with its Contrib directory, which ships Hall's
implementation of Ertl's functional-group algorithm).  RDKit is NOT a
dependency of the package; this script is run by hand and its output is
checked in.

    python tools/make_fixtures.py
"""

import csv
import json
import os
import sys
from pathlib import Path

from rdkit import Chem, RDConfig, RDLogger
from rdkit.Chem.Scaffolds import MurckoScaffold

sys.path.append(os.path.join(RDConfig.RDContribDir, "IFG"))
from ifg import identify_functional_groups  # noqa: E402

RDLogger.DisableLog("rdApp.*")

ROOT = Path(__file__).resolve().parents[1]
FIX = ROOT / "tests" / "fixtures"

DEQUALINIUM = "Cc1cc(N)c2ccccc2[n+]1CCCCCCCCCC[n+]1c(C)cc(N)c2ccccc21"
IRINOTECAN = "CCc1c2c(nc3ccc(OC(=O)N4CCC(N5CCCCC5)CC4)cc13)-c1cc3c(c(=O)n1C2)COC(=O)[C@]3(O)CC"

# 25 curated molecules: no-FG, carbonyl, nitrile, acetal, alkene, epoxide-like
# rings, aromatic heteroatoms and halogens
FG_CURATED = [
    "CCCCCC",
    "c1ccccc1",
    "CC(=O)O",
    "C=C",
    "CC#N",
    "CC(=O)C",
    "CCC=O",
    "COC(C)OC",
    "C1CO1",
    "CC1CN1",
    "C1CS1",
    "c1ccncc1",
    "c1ccc2[nH]ccc2c1",
    "Clc1ccccc1",
    "CC(F)(F)F",
    "CC=CC(=O)OC",
    "OC1OCCCC1",
    "CN(C)C(=O)c1ccc(cc1)OC",
    "O=C1CCCCC1",
    "Cc1ccc(cc1)S(=O)(=O)N",
    "C#CCO",
    "N#Cc1ccccc1",
    "O=c1cc[nH]c(=O)[nH]1",
    DEQUALINIUM,
    IRINOTECAN,
]

SCAFFOLD_SET = [
    "CCCCCC",
    "c1ccccc1",
    "Cc1ccccc1",
    "CCc1ccccc1",
    "CC(=O)c1ccccc1",
    "O=C1CCCCC1",
    "CC1CCCCC1=O",
    "c1ccc(Cc2ccccc2)cc1",
    "c1ccc(CCc2ccccc2)cc1",
    "OCc1ccc(Cc2ccccc2)cc1",
    "c1ccncc1",
    "Cc1ccncc1",
    "c1ccc2ccccc2c1",
    "Oc1ccc2ccccc2c1",
    "C1CCCCC1",
    "CC1CCCCC1",
    "C1CC2CCC1CC2",
    "CCC1CC2CCC1CC2",
    "c1ccc(-c2ccccc2)cc1",
    "Clc1ccc(-c2ccccc2)cc1",
    "O=C(Nc1ccccc1)c1ccccc1",
    "CN(C)C(=O)c1ccc(cc1)OC",
]


def ifg_groups(mol):
    return sorted(sorted(int(i) for i in g.atomIds) for g in identify_functional_groups(mol))


def lowercase_aromatic_agrees(smi, mol):
    """True if RDKit's aromatic flags equal the case used in the input."""
    from funqg.smiles import tokenize

    atoms = [t for t in tokenize(smi) if t.kind in ("organic-atom", "bracket-atom")]
    if len(atoms) != mol.GetNumAtoms():
        return False
    return all(t.aromatic == a.GetIsAromatic() for t, a in zip(atoms, mol.GetAtoms()))


def main():
    FIX.mkdir(parents=True, exist_ok=True)

    with open(FIX / "fg_parity.jsonl", "w") as fh:
        for smi in FG_CURATED:
            mol = Chem.MolFromSmiles(smi)
            assert lowercase_aromatic_agrees(smi, mol), smi
            fh.write(json.dumps({"smiles": smi, "groups": ifg_groups(mol)}) + "\n")

    ref = {}
    for name, smi in (("dequalinium", DEQUALINIUM), ("irinotecan", IRINOTECAN)):
        mol = Chem.MolFromSmiles(smi)
        ref[name] = {
            "smiles": smi,
            "heavy_atoms": mol.GetNumHeavyAtoms(),
            "bonds": mol.GetNumBonds(),
            "ring_bonds": sum(b.IsInRing() for b in mol.GetBonds()),
        }
    ref["scaffolds"] = {
        smi: MurckoScaffold.MurckoScaffoldSmiles(mol=Chem.MolFromSmiles(smi)) for smi in SCAFFOLD_SET
    }
    (FIX / "reference.json").write_text(json.dumps(ref, indent=1, sort_keys=True) + "\n")

    # corpus-wide checks on FreeSolv: heavy atoms, ring bonds, IFG groups
    freesolv = ROOT / "data" / "freesolv.csv"
    if freesolv.exists():
        with open(freesolv) as fh, open(FIX / "freesolv_reference.jsonl", "w") as out:
            for row in csv.DictReader(fh):
                smi = row["smiles"]
                mol = Chem.MolFromSmiles(smi)
                rec = {
                    "smiles": smi,
                    "heavy_atoms": mol.GetNumHeavyAtoms(),
                    "ring_bonds": sum(b.IsInRing() for b in mol.GetBonds()),
                    "aromatic_agrees": lowercase_aromatic_agrees(smi, mol),
                    "groups": ifg_groups(mol),
                    "scaffold": MurckoScaffold.MurckoScaffoldSmiles(mol=mol),
                }
                out.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
