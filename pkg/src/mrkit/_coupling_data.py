"""Compiled-in coupling coefficients (0-based ``(row, column): value`` entries).

The IMEX tables were produced by ``scripts/derive_imex_mri_couplings.py``:
for a fixed stage layout the remaining entries solve every three-colored tree
condition of the target order (exact fast solve) to roundoff.  The order-3
layout reproduces Alexander's L-stable SDIRK3 as its slow implicit method; the
order-4 layout (seed 0) has an L-stable slow implicit method and was tuned in
the null space of the order conditions for joint fast/implicit stability.
"""

SDIRK3_GAMMA = 0.43586652150845899941601945

MIS_KW3 = dict(
    c=[0.0, 1 / 3, 3 / 4, 1.0],
    kinds=["explicit-update", "fast-ivp", "fast-ivp", "fast-ivp"],
    gamma=[{}],
    # differences of consecutive rows of the base table extended by its weights
    omega=[{(1, 0): 1 / 3,
            (2, 0): -25 / 48, (2, 1): 15 / 16,
            (3, 0): 17 / 48, (3, 1): -51 / 80, (3, 2): 8 / 15}],
    order=3,
)

IMEX_MRI_GARK3B = dict(
    c=[0.0, SDIRK3_GAMMA, SDIRK3_GAMMA, (1 + SDIRK3_GAMMA) / 2, (1 + SDIRK3_GAMMA) / 2, 1.0, 1.0, 1.0],
    kinds=["explicit-update", "fast-ivp", "implicit-solve", "fast-ivp", "implicit-solve",
           "fast-ivp", "implicit-solve", "explicit-update"],
    gamma=[
        {(1, 0): 0.43586652150845917,
         (2, 0): -0.43586652150845917,
         (2, 2): 0.435866521508459,
         (3, 0): 0.22032878775172451,
         (3, 2): 0.061737951494046164,
         (4, 0): -0.2203287877517246,
         (4, 2): -0.2155377337567347,
         (4, 4): 0.435866521508459,
         (5, 0): 0.1917382403362951,
         (5, 2): 0.5732622501749242,
         (5, 4): -0.48293375126544896,
         (6, 0): -0.191738240336295,
         (6, 2): 0.3531676597553156,
         (6, 4): -0.5972959409274793,
         (6, 6): 0.435866521508459},
    ],
    omega=[
        {(1, 0): 0.4358665215084589,
         (3, 0): -0.21143665801744438,
         (3, 2): 0.49350339726321474,
         (4, 0): -0.07447611584426936,
         (4, 2): 0.07447611584426936,
         (5, 0): -0.5333882658894237,
         (5, 2): 0.40386530912797336,
         (5, 4): 0.4115896960072214,
         (6, 0): -0.13681897262574047,
         (6, 2): 0.24444677879932186,
         (6, 4): -0.10762780617358185,
         (7, 0): 0.520253490868419,
         (7, 2): -0.00779495185876931,
         (7, 4): -0.9483250605181086,
         (7, 6): 0.435866521508459},
    ],
    order=3,
)

IMEX_MRI_GARK4 = dict(
    c=[0.0, 1 / 2, 1 / 2, 5 / 8, 5 / 8, 3 / 4, 3 / 4, 7 / 8, 7 / 8, 1.0, 1.0, 1.0],
    kinds=["explicit-update"] + ["fast-ivp", "implicit-solve"] * 5 + ["explicit-update"],
    # diagonal 1/4; slow implicit method stiffly accurate and L-stable; joint
    # amplification with exact fast solves at most 0.7 on the derivation grid
    gamma=[
        {(1, 0): 0.5000000000000012,
         (2, 0): -0.24999999999999928,
         (2, 2): 0.25,
         (3, 0): 0.15462353067713672,
         (3, 2): -0.029623530677199604,
         (4, 0): -0.16118500093466664,
         (4, 2): -0.08881499906536942,
         (4, 4): 0.25,
         (5, 0): -1.590610852084982,
         (5, 2): 1.1727314280542898,
         (5, 4): 0.5428794240306674,
         (6, 0): 1.5825481130384615,
         (6, 2): -0.6348017482379569,
         (6, 4): -1.197746364800527,
         (6, 6): 0.25,
         (7, 0): -0.2929905078481365,
         (7, 2): 0.23418864246603066,
         (7, 4): 0.049314248396537426,
         (7, 6): 0.1344876169855691,
         (8, 0): 0.23726492774447558,
         (8, 2): -0.040583346503058955,
         (8, 4): -0.3729718888674349,
         (8, 6): -0.07370969237398388,
         (8, 8): 0.25,
         (9, 0): 0.48869284050398576,
         (9, 2): -0.07827570080305006,
         (9, 4): -0.11790809098932337,
         (9, 6): 0.9624017240733839,
         (9, 8): -1.1299107727851971,
         (10, 0): -0.6086156314012299,
         (10, 2): -0.11958612488749694,
         (10, 4): 0.43091094369540817,
         (10, 6): -0.5901398408330748,
         (10, 8): 0.63743065342631,
         (10, 10): 0.25},
        {(3, 0): 0.10687294051505951,
         (3, 2): -0.10687294051486185,
         (5, 0): -0.17693915124817186,
         (5, 2): 0.26446378707339924,
         (5, 4): -0.08752463582513265,
         (7, 0): 0.0811187505038988,
         (7, 2): 0.1947323253056236,
         (7, 4): 0.040423904699203386,
         (7, 6): -0.3162749805087222,
         (9, 0): 0.19965169226694432,
         (9, 2): -0.07169324586355032,
         (9, 4): -0.055160478534563136,
         (9, 6): 0.17239369819090963,
         (9, 8): -0.24519166605917161},
    ],
    omega=[
        {(1, 0): 0.5000000000000011,
         (3, 0): -0.05275486782954904,
         (3, 2): 0.17775486782956348,
         (4, 0): -0.44339248036124007,
         (4, 2): 0.44339248036124607,
         (5, 0): -0.9621501461538338,
         (5, 2): 0.2242963387296854,
         (5, 4): 0.8628538074241601,
         (6, 0): 0.5089047901013563,
         (6, 2): -0.25768421872370095,
         (6, 4): -0.25122057137765014,
         (7, 0): 1.1391594316012335,
         (7, 2): -0.23543639692915494,
         (7, 4): -0.5479504937005726,
         (7, 6): -0.23077254097152017,
         (8, 0): -0.4353624922116415,
         (8, 2): -0.03777641943985335,
         (8, 4): -0.05107998880701421,
         (8, 6): 0.5242189004585044,
         (9, 0): 0.5345927026297908,
         (9, 2): 0.20619415406526287,
         (9, 4): -0.12164807157695329,
         (9, 6): 0.12992547208786234,
         (9, 8): -0.6240642572059321,
         (10, 0): 0.03835094822897669,
         (10, 2): 0.022999476374648917,
         (10, 4): -0.3704159280112157,
         (10, 6): -0.22550515395703224,
         (10, 8): 0.5345706573646353,
         (11, 0): -0.7326487205329663,
         (11, 2): 0.21540286028893843,
         (11, 4): 0.05735104163932378,
         (11, 6): 0.41889470586591465,
         (11, 8): -0.20899988726121033,
         (11, 10): 0.24999999999999986},
        {(3, 0): -0.10777450697977115,
         (3, 2): 0.10777450697972986,
         (5, 0): -0.24297434572126758,
         (5, 2): 0.015657923055274005,
         (5, 4): 0.22731642266596017,
         (7, 0): 0.30525997041770403,
         (7, 2): -0.09575935167755967,
         (7, 4): -0.20441924334111466,
         (7, 6): -0.005081375398991932,
         (9, 0): 0.1862496227669014,
         (9, 2): 0.06513980322226968,
         (9, 4): -0.11198143723483654,
         (9, 6): -0.006243058182491252,
         (9, 8): -0.1331649305719304},
    ],
    order=4,
)
