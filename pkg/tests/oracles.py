"""Independent brute-force oracles for the detection metrics."""


def brute_points(tar, non):
    """Loop over every candidate threshold; accept iff score >= threshold."""
    cands = sorted(set(tar) | set(non)) + [float("inf")]
    pts = []
    for t in cands:
        miss = sum(1 for s in tar if s < t)
        fa = sum(1 for s in non if s >= t)
        pts.append((t, miss / len(tar), fa / len(non)))
    return pts


def brute_eer(tar, non):
    pts = brute_points(tar, non)
    for k, (_, pm, pf) in enumerate(pts):
        if pm == pf:
            return pm
        if pm > pf:
            _, pm0, pf0 = pts[k - 1]
            d0, d1 = pm0 - pf0, pm - pf
            t = d0 / (d0 - d1)
            return pm0 + t * (pm - pm0)
    raise AssertionError("curves never cross")


def brute_min_dcf(tar, non, p, cm=1.0, cf=1.0):
    a, b = cm * p, cf * (1 - p)
    return min((a * pm + b * pf) / min(a, b) for _, pm, pf in brute_points(tar, non))
