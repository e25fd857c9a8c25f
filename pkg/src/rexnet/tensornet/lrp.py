"""Relevance decomposition for dense+ReLU stacks (epsilon stabilizer rule).

A head is described as a sequence of (W, b, relu) triples with W of shape
(in, out). Relevance starts at the chosen output logit and is redistributed
backwards proportionally to each unit's contribution z_jk = a_j * W_jk.
"""

import numpy as np


def lrp_attribute(layers, x, output_index, eps=1e-6):
    """Per-input relevance of `layers` output `output_index` for input `x`."""
    a = np.asarray(x, dtype=np.float64)
    acts = [a]
    pre = []
    for w, b, relu in layers:
        z = a @ w
        if b is not None:
            z = z + b
        pre.append(z)
        a = np.maximum(z, 0.0) if relu else z
        acts.append(a)

    rel = np.zeros_like(pre[-1])
    rel[output_index] = pre[-1][output_index]
    for (w, b, relu), a_in, z in zip(reversed(layers), reversed(acts[:-1]), reversed(pre)):
        denom = z + eps * np.where(z >= 0, 1.0, -1.0)
        s = rel / denom
        rel = a_in * (w @ s)
    return rel
