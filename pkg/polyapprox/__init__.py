"""Learning polytopic approximations of feasible regions from support and projection oracles."""
