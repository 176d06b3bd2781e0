"""Reference values computed by ``scripts/compute_oracles.py`` (mpmath, scipy) without modalflow.

Rerun the script to regenerate; every constant here is one of its printed lines.
"""

PHI0 = 0.3989422804014327  # standard normal density at 0
PHI1 = 0.24197072451914334  # standard normal density at 1
INV_2PI = 0.15915494309189535  # standard 2D normal density at the origin
KDE_012_AT_1 = 0.2942945764799065  # unit-bandwidth Gaussian KDE of {0, 1, 2} at 1
ZETA_1D_LEVEL = 0.29197072451914335  # f(1) + 0.05 for the standard normal
ZETA_2D_RADIUS = 0.40652668161234007  # radius where the 2D normal equals f((1, 0)) + 0.05
PROJ_1D_T03 = 0.7550288353715549  # positive root of phi(x) = 0.3
PROJ_1D_T025 = 0.9668048695731914  # positive root of phi(x) = 0.25
PROJ_2D_T01_RADIUS = 0.9640622662304549  # radius of {f = 0.1} for the 2D normal

MIX1_LEFT_MODE = 0.00785188740626682
MIX1_RIGHT_MODE = 3.4921481125937333
MIX1_MODE_LEVEL = 0.19991347655855365
MIX1_SADDLE = 1.75
MIX1_SADDLE_LEVEL = 0.08627731882651152
MIX1_BALL_ARGMAX_1_005 = 0.95  # argmax of D_mix1 on [0.95, 1.05]

BACKWARD_EULER_1_01 = 0.9758171901687631  # root of y = 1 - 0.1 * y * phi(y)

MIX2_MODE_HI = (2.971589612573838, 0.9968232340299886)
MIX2_MODE_LO = (0.05072983228028494, 0.0490702808680305)
MIX2_MODE_HI_LEVEL = 0.09244801436531846
MIX2_MODE_LO_LEVEL = 0.08142760200582756
MIX2_SADDLE = (1.2732810075391592, 0.6886866156428508)
MIX2_SADDLE_LEVEL = 0.05877998395041732
