# Desk laboratory for variant reflected backward doubly stochastic differential equations
