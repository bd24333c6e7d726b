"""Dense reference computations used by several test modules."""
import numpy as np


def joint_prior(spec, t_len):
    """Mean (T*P,) and covariance (T*P, T*P) of the stacked AR(1) path."""
    p = spec.dim
    means = [spec.m0]
    covs = [spec.c0]
    for _ in range(1, t_len):
        means.append(spec.mu + spec.phi @ (means[-1] - spec.mu))
        covs.append(spec.phi @ covs[-1] @ spec.phi.T + spec.w)
    big = np.zeros((t_len * p, t_len * p))
    for t in range(t_len):
        big[t * p:(t + 1) * p, t * p:(t + 1) * p] = covs[t]
        prop = np.eye(p)
        for s in range(t + 1, t_len):
            prop = spec.phi @ prop
            block = prop @ covs[t]
            big[s * p:(s + 1) * p, t * p:(t + 1) * p] = block
            big[t * p:(t + 1) * p, s * p:(s + 1) * p] = block.T
    return np.concatenate(means), big


def condition(spec, data, upto=None):
    """Posterior mean and covariance of the stacked path given z_1..z_upto."""
    t_len = len(data)
    p = spec.dim
    upto = t_len if upto is None else upto
    mean, cov = joint_prior(spec, t_len)
    rows = [t for t in range(upto) if data.observed[t]]
    if not rows:
        return mean, cov
    h = np.zeros((len(rows), t_len * p))
    for k, t in enumerate(rows):
        h[k, t * p:(t + 1) * p] = data.x[t]
    noise = np.diag(1.0 / data.precision[rows])
    s = h @ cov @ h.T + noise
    gain = np.linalg.solve(s, h @ cov).T
    post_mean = mean + gain @ (data.z[rows] - h @ mean)
    post_cov = cov - gain @ h @ cov
    return post_mean, 0.5 * (post_cov + post_cov.T)
