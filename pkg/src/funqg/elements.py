"""Element data used by the parser and featurizer."""

_SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn "
    "Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl "
    "Mc Lv Ts Og"
).split()

# standard atomic weights; mass numbers of the longest-lived isotope where none exists
_MASSES = (
    1.008, 4.0026, 6.941, 9.0122, 10.811, 12.011, 14.0067, 15.9994, 18.9984, 20.1797,
    22.9898, 24.305, 26.9815, 28.0855, 30.9738, 32.065, 35.453, 39.948, 39.0983, 40.078,
    44.9559, 47.867, 50.9415, 51.9961, 54.938, 55.845, 58.9332, 58.6934, 63.546, 65.38,
    69.723, 72.64, 74.9216, 78.96, 79.904, 83.798, 85.4678, 87.62, 88.9059, 91.224,
    92.9064, 95.96, 98.0, 101.07, 102.9055, 106.42, 107.8682, 112.411, 114.818, 118.71,
    121.76, 127.6, 126.9045, 131.293, 132.9055, 137.327, 138.9055, 140.116, 140.9077,
    144.242, 145.0, 150.36, 151.964, 157.25, 158.9254, 162.5, 164.9303, 167.259,
    168.9342, 173.054, 174.9668, 178.49, 180.9479, 183.84, 186.207, 190.23, 192.217,
    195.084, 196.9666, 200.59, 204.3833, 207.2, 208.9804, 209.0, 210.0, 222.0, 223.0,
    226.0, 227.0, 232.0381, 231.0359, 238.0289, 237.0, 244.0, 243.0, 247.0, 247.0,
    251.0, 252.0, 257.0, 258.0, 259.0, 262.0, 267.0, 268.0, 271.0, 272.0, 270.0, 276.0,
    281.0, 280.0, 285.0, 284.0, 289.0, 288.0, 293.0, 294.0, 294.0,
)

ATOMIC_NUMBER = {sym: i + 1 for i, sym in enumerate(_SYMBOLS)}
ATOMIC_MASS = dict(zip(_SYMBOLS, _MASSES))

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
# lowercase symbols accepted inside brackets
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")

DEFAULT_VALENCE = {"B": 3, "C": 4, "N": 3, "O": 2, "P": 3, "S": 2, "F": 1, "Cl": 1, "Br": 1, "I": 1}

# ceiling used to reject impossible explicit bonding (hypervalent S/P/N and
# oxo-halogens are legal in SMILES even though their default valence is lower)
MAX_VALENCE = {
    "H": 1, "B": 4, "C": 4, "N": 5, "O": 2, "P": 5, "S": 6,
    "F": 1, "Cl": 7, "Br": 7, "I": 7, "Si": 4, "Se": 6,
}

HALOGENS = frozenset({"F", "Cl", "Br", "I"})
