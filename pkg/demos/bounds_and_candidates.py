"""
Lower bounds and candidate lists on eil51
=========================================

Before any tour is built the solver tightens a 1-tree bound with node
penalties, measures how far each edge is from entering the tree (alpha),
and turns both into starting Q-values for the candidate lists.
"""
import numpy as np

from rlkopt.tsplib import load_instance, load_optimal_tour
from rlkopt.candidates import init_q
from rlkopt.onetree import Penalties, alpha_values, minimum_one_tree, subgradient_ascent

inst = load_instance("eil51")
print(inst.name, inst.dimension, "cities, optimum", inst.known_optimum)

# the plain minimum 1-tree is already a bound, but a loose one
plain = minimum_one_tree(inst)
print("1-tree without penalties:", plain.w_scaled / 1000)

# sub-gradient ascent pushes nodes of degree != 2 toward degree 2
pen = subgradient_ascent(inst)
print("after ascent:            ", pen.w)
print("iterations:", len(pen.history), "gap to optimum: %.2f%%"
      % (100 * (inst.known_optimum - pen.w) / inst.known_optimum))

# bound along the ascent, every 50th iteration
print(np.asarray(pen.history[::50]) / 1000)

# alpha of an edge: how much longer the best 1-tree gets when it must contain it
tree = minimum_one_tree(inst, pen)
alpha = alpha_values(inst, tree)
print("tree edges at city 1:", [b + 1 for a, b in tree.edges() if a == 0] +
      [a + 1 for a, b in tree.edges() if b == 0])
for j, a in sorted(alpha.items(0), key=lambda t: t[1])[:8]:
    print(f"  1 -> {j + 1:2d}  alpha {a:8.3f}  d {inst.distance(0, j)}")

# initial Q = w(pi) / (100 alpha + d): alpha ranks, distance breaks ties
qt = init_q(inst, alpha, pen)
for i in range(3):
    print(i + 1, [(j + 1, round(q, 1)) for j, q in qt.entries(i)])

# how many optimal-tour edges the five candidates cover
opt = load_optimal_tour("eil51").order.tolist()
hits = sum(opt[(k + 1) % inst.n] in qt.candidates(opt[k]) for k in range(inst.n))
print(f"optimal successors inside the candidate list: {hits}/{inst.n}")

# the same table, zero penalties: alpha then is plain MST nearness
flat = init_q(inst, alpha_values(inst, plain), Penalties(np.zeros(inst.n, dtype=np.int64),
                                                          plain.w_scaled))
print("first candidates of city 1 without penalties:", [j + 1 for j in flat.candidates(0)])
