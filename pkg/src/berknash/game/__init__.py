"""Game model, equilibrium solvers, learning dynamics and the designer problem."""
