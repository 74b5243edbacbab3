"""Published numeric tables used as targets."""

import math

# contiguous power at theta0 = 0, Delta = sqrt(10), alpha = 0.05; keyed by gamma = beta
TABLE1 = {0.0: 0.89, 0.1: 0.88, 0.3: 0.86, 0.5: 0.83, 0.7: 0.79, 1.0: 0.72}
TABLE1_DELTA = math.sqrt(10)

# empirical size, n = 50, 1000 replications, data (1 - eps) N(0,1) + eps N(1,1)
# TABLE2[gamma = beta][row for eps][column for lambda]
TABLE2_EPSILONS = (0.0, 0.05, 0.1)
TABLE2_LAMBDAS = (-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0)
TABLE2 = {
    0.0:[[0.064,0.054,0.053,0.054,0.056,0.059,0.078],[0.092,0.078,0.077,0.078,0.079,0.082,0.111],[0.149,0.133,0.133,0.133,0.136,0.138,0.161]],
    0.1:[[0.058,0.047,0.047,0.047,0.051,0.053,0.070],[0.087,0.081,0.080,0.081,0.081,0.082,0.097],[0.143,0.123,0.121,0.123,0.126,0.129,0.158]],
    0.3:[[0.057,0.049,0.049,0.049,0.050,0.052,0.061],[0.076,0.069,0.069,0.069,0.069,0.072,0.080],[0.128,0.119,0.119,0.119,0.123,0.123,0.134]],
    0.5:[[0.058,0.053,0.053,0.053,0.053,0.055,0.060],[0.068,0.065,0.065,0.065,0.066,0.066,0.070],[0.111,0.106,0.106,0.106,0.108,0.108,0.115]],
    1.0:[[0.053]*7,[0.066]*7,[0.094]*7]}

# c(g_eps)/c(f) at y = 4, theta0 = 0; TABLE3[sigma][row for eps][column for gamma = beta]
TABLE3_EPSILONS = (0.0005, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1)
TABLE3_BETAS = (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)
TABLE3 = {
0.5: [[1.0315,1.0105,1.0029,1.0013,1.0007,1.0006],[1.0629,1.0211,1.0057,1.0025,1.0014,1.0010],[1.3134,1.1082,1.0290,1.0126,1.0073,1.0054],[1.6236,1.2231,1.0593,1.0256,1.0147,1.0107],[2.2344,1.4752,1.1242,1.0524,1.0297,1.0216],[3.9900,2.4609,1.3592,1.1411,1.0777,1.0560],[6.6600,5.4663,1.9592,1.3223,1.1679,1.1186]],
1.0: [[1.0075,1.0030,1.0011,1.0006,1.0006,1.0005],[1.0150,1.0059,1.0022,1.0015,1.0011,1.0012],[1.0746,1.0296,1.0115,1.0075,1.0058,1.0053],[1.1484,1.0597,1.0232,1.0151,1.0116,1.0104],[1.2936,1.1213,1.0476,1.0305,1.0238,1.0210],[1.7100,1.3190,1.1265,1.0799,1.0619,1.0543],[2.3400,1.6984,1.2821,1.1734,1.1320,1.1147]],
2.0: [[1.0015,1.0007,1.0005,1.0007,1.0006,1.0005],[1.0030,1.0015,1.0012,1.0011,1.0009,1.0009],[1.0149,1.0078,1.0058,1.0055,1.0052,1.0051],[1.0296,1.0156,1.0118,1.0113,1.0107,1.0101],[1.0584,1.0312,1.0239,1.0225,1.0213,1.0203],[1.1400,1.0786,1.0617,1.0584,1.0552,1.0529],[1.2600,1.1591,1.1307,1.1239,1.1171,1.1123]]}
