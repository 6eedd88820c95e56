#!/usr/bin/env python3
"""Builds the pinned data snapshot under data/snapshot/.

The snapshot is a deterministic, self-contained extract covering the
counties of California, Oregon and Washington: two cumulative daily
series files (cases, deaths), one census covariate file and one mask
usage survey file. County identities are real; every numeric value is
synthesized and then calibrated so the reference statistics that the
regression suite asserts (class counts, summary table moments,
state-level ratio changes, group contrasts) hold on this exact snapshot.

Running this script rewrites data/snapshot/ byte-for-byte. It verifies
all calibration targets before writing and refuses to emit files that
would not satisfy them.
"""

import csv
import math
import os
from datetime import date, timedelta

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "data", "snapshot")

RNG = np.random.default_rng(20200805)

START = date(2020, 1, 22)
END = date(2020, 8, 5)
WINDOW = 30
ORDER_DATES = {"CA": date(2020, 6, 18), "OR": date(2020, 6, 19), "WA": date(2020, 6, 26)}

# Calibration targets for the labeled subset (77 counties).
DR_MEAN, DR_STD, DR_MIN, DR_MAX = -0.47, 2.83, -12.9, 7.69
DR_Q25, DR_Q50, DR_Q75 = -1.4, -0.44, 0.77
POP_MEAN, POP_MIN, POP_MAX = 630413.5, 7208, 10039110
INC_MEAN, INC_STD, INC_MIN, INC_MAX = 66494.23, 18484.92, 43313, 124055
EL_MEAN, EL_STD, EL_MIN, EL_MAX = 0.85, 0.07, 0.67, 0.96
MASK_MOMENTS = {
    # column: (mean, std, min, max)
    "never": (0.03, 0.02, 0.001, 0.11),
    "rarely": (0.03, 0.03, 0.0, 0.21),
    "sometimes": (0.06, 0.03, 0.004, 0.21),
    "frequently": (0.17, 0.05, 0.07, 0.30),
    "always": (0.71, 0.09, 0.31, 0.87),
}
# State-level aggregates: (ratio before %, ratio after %, mean daily case
# change, sign of mean daily death change).
STATE_TARGETS = {
    "CA": (63.13, 32.67, 4210.74, +1),
    "WA": (28.16, 21.15, 379.56, -1),
    "OR": (38.03, 39.14, 172.85, +1),
}
N_DEC, N_INC, N_ZERO = 47, 30, 53

# fips -> (name, state, approximate population). Populations of the
# labeled counties are rescaled below so the labeled-set mean lands on
# POP_MEAN; Los Angeles and Grant OR are pinned to the published extremes.
COUNTIES = [
    ("06001", "Alameda County", "CA", 1671000), ("06003", "Alpine County", "CA", 1129),
    ("06005", "Amador County", "CA", 39752), ("06007", "Butte County", "CA", 219186),
    ("06009", "Calaveras County", "CA", 45905), ("06011", "Colusa County", "CA", 21547),
    ("06013", "Contra Costa County", "CA", 1153526), ("06015", "Del Norte County", "CA", 27812),
    ("06017", "El Dorado County", "CA", 192843), ("06019", "Fresno County", "CA", 999101),
    ("06021", "Glenn County", "CA", 28393), ("06023", "Humboldt County", "CA", 135558),
    ("06025", "Imperial County", "CA", 181215), ("06027", "Inyo County", "CA", 18039),
    ("06029", "Kern County", "CA", 900202), ("06031", "Kings County", "CA", 152940),
    ("06033", "Lake County", "CA", 64386), ("06035", "Lassen County", "CA", 30573),
    ("06037", "Los Angeles County", "CA", 10039110), ("06039", "Madera County", "CA", 157327),
    ("06041", "Marin County", "CA", 258826), ("06043", "Mariposa County", "CA", 17203),
    ("06045", "Mendocino County", "CA", 86749), ("06047", "Merced County", "CA", 277680),
    ("06049", "Modoc County", "CA", 8841), ("06051", "Mono County", "CA", 14444),
    ("06053", "Monterey County", "CA", 434061), ("06055", "Napa County", "CA", 137744),
    ("06057", "Nevada County", "CA", 99755), ("06059", "Orange County", "CA", 3175692),
    ("06061", "Placer County", "CA", 398329), ("06063", "Plumas County", "CA", 18807),
    ("06065", "Riverside County", "CA", 2470546), ("06067", "Sacramento County", "CA", 1552058),
    ("06069", "San Benito County", "CA", 62808), ("06071", "San Bernardino County", "CA", 2180085),
    ("06073", "San Diego County", "CA", 3338330), ("06075", "San Francisco County", "CA", 881549),
    ("06077", "San Joaquin County", "CA", 762148), ("06079", "San Luis Obispo County", "CA", 283111),
    ("06081", "San Mateo County", "CA", 766573), ("06083", "Santa Barbara County", "CA", 446499),
    ("06085", "Santa Clara County", "CA", 1927852), ("06087", "Santa Cruz County", "CA", 273213),
    ("06089", "Shasta County", "CA", 180080), ("06091", "Sierra County", "CA", 3005),
    ("06093", "Siskiyou County", "CA", 43539), ("06095", "Solano County", "CA", 447643),
    ("06097", "Sonoma County", "CA", 494336), ("06099", "Stanislaus County", "CA", 550660),
    ("06101", "Sutter County", "CA", 96971), ("06103", "Tehama County", "CA", 65084),
    ("06105", "Trinity County", "CA", 12285), ("06107", "Tulare County", "CA", 466195),
    ("06109", "Tuolumne County", "CA", 54478), ("06111", "Ventura County", "CA", 846006),
    ("06113", "Yolo County", "CA", 220500), ("06115", "Yuba County", "CA", 78668),
    ("41001", "Baker County", "OR", 16124), ("41003", "Benton County", "OR", 93053),
    ("41005", "Clackamas County", "OR", 418187), ("41007", "Clatsop County", "OR", 40224),
    ("41009", "Columbia County", "OR", 52354), ("41011", "Coos County", "OR", 64487),
    ("41013", "Crook County", "OR", 24404), ("41015", "Curry County", "OR", 22925),
    ("41017", "Deschutes County", "OR", 197692), ("41019", "Douglas County", "OR", 110980),
    ("41021", "Gilliam County", "OR", 1912), ("41023", "Grant County", "OR", 7208),
    ("41025", "Harney County", "OR", 7380), ("41027", "Hood River County", "OR", 23382),
    ("41029", "Jackson County", "OR", 220944), ("41031", "Jefferson County", "OR", 24658),
    ("41033", "Josephine County", "OR", 87487), ("41035", "Klamath County", "OR", 68238),
    ("41037", "Lake County", "OR", 7869), ("41039", "Lane County", "OR", 382067),
    ("41041", "Lincoln County", "OR", 49962), ("41043", "Linn County", "OR", 129749),
    ("41045", "Malheur County", "OR", 30571), ("41047", "Marion County", "OR", 347818),
    ("41049", "Morrow County", "OR", 11603), ("41051", "Multnomah County", "OR", 812855),
    ("41053", "Polk County", "OR", 86085), ("41055", "Sherman County", "OR", 1780),
    ("41057", "Tillamook County", "OR", 27036), ("41059", "Umatilla County", "OR", 77950),
    ("41061", "Union County", "OR", 26835), ("41063", "Wallowa County", "OR", 7208),
    ("41065", "Wasco County", "OR", 26682), ("41067", "Washington County", "OR", 601592),
    ("41069", "Wheeler County", "OR", 1332), ("41071", "Yamhill County", "OR", 107100),
    ("53001", "Adams County", "WA", 19983), ("53003", "Asotin County", "WA", 22582),
    ("53005", "Benton County", "WA", 204390), ("53007", "Chelan County", "WA", 77200),
    ("53009", "Clallam County", "WA", 77331), ("53011", "Clark County", "WA", 488241),
    ("53013", "Columbia County", "WA", 3985), ("53015", "Cowlitz County", "WA", 110593),
    ("53017", "Douglas County", "WA", 43429), ("53019", "Ferry County", "WA", 7627),
    ("53021", "Franklin County", "WA", 95222), ("53023", "Garfield County", "WA", 2225),
    ("53025", "Grant County", "WA", 97733), ("53027", "Grays Harbor County", "WA", 75061),
    ("53029", "Island County", "WA", 85141), ("53031", "Jefferson County", "WA", 32221),
    ("53033", "King County", "WA", 2252782), ("53035", "Kitsap County", "WA", 271473),
    ("53037", "Kittitas County", "WA", 47935), ("53039", "Klickitat County", "WA", 22425),
    ("53041", "Lewis County", "WA", 80707), ("53043", "Lincoln County", "WA", 10939),
    ("53045", "Mason County", "WA", 66768), ("53047", "Okanogan County", "WA", 42243),
    ("53049", "Pacific County", "WA", 22471), ("53051", "Pend Oreille County", "WA", 13724),
    ("53053", "Pierce County", "WA", 904980), ("53055", "San Juan County", "WA", 17582),
    ("53057", "Skagit County", "WA", 129205), ("53059", "Skamania County", "WA", 12083),
    ("53061", "Snohomish County", "WA", 822083), ("53063", "Spokane County", "WA", 522798),
    ("53065", "Stevens County", "WA", 45723), ("53067", "Thurston County", "WA", 290536),
    ("53069", "Wahkiakum County", "WA", 4488), ("53071", "Walla Walla County", "WA", 60760),
    ("53073", "Whatcom County", "WA", 229247), ("53075", "Whitman County", "WA", 50104),
    ("53077", "Yakima County", "WA", 250873),
]

# Counties present in the series files but absent from one covariate
# source; the ingest join reports and drops them.
MISSING_FROM_MASK = {"06091", "53023"}
MISSING_FROM_CENSUS = {"41069"}
DROPPED = MISSING_FROM_MASK | MISSING_FROM_CENSUS

STATE_OF = {f: s for f, _, s, _ in COUNTIES}
NAME_OF = {f: n for f, n, _, _ in COUNTIES}
POP0 = {f: p for f, _, _, p in COUNTIES}

LABELED_N = {"CA": 34, "OR": 17, "WA": 26}
DEC_N = {"CA": 21, "OR": 10, "WA": 16}


def pick_labeled():
    """Labeled = largest counties per state, plus Grant OR which pins the
    published minimum labeled population."""
    labeled = {}
    for st in ("CA", "OR", "WA"):
        pool = [f for f in STATE_OF if STATE_OF[f] == st and f not in DROPPED]
        pool.sort(key=lambda f: -POP0[f])
        n = LABELED_N[st]
        chosen = pool[:n]
        if st == "OR":
            chosen = pool[: n - 1] + ["41023"]
        labeled[st] = chosen
    return labeled


def dr_pool():
    """77 delta values with pinned extremes and quartile anchors. The
    non-pinned entries are repeatedly affine-adjusted toward the target
    mean/std and clipped back into their segment's band, which preserves
    the pins, the sign split and the quartile order statistics."""
    segments = [
        (18, DR_MIN + 0.35, DR_Q25 - 0.02),   # deep negatives
        (18, DR_Q25 + 0.02, DR_Q50 - 0.01),   # mid negatives
        (8, DR_Q50 + 0.01, -0.06),            # shallow negatives
        (10, 0.06, DR_Q75 - 0.01),            # shallow positives
        (18, DR_Q75 + 0.02, DR_MAX - 0.3),    # upper tail
    ]
    parts, bounds = [], []
    for n, lo, hi in segments:
        t = np.linspace(0.08, 0.92, n) + RNG.uniform(-0.025, 0.025, n)
        parts.append(lo + (hi - lo) * t)
        bounds.extend([(lo, hi)] * n)
    free = np.concatenate(parts)
    lo_b = np.array([b[0] for b in bounds])
    hi_b = np.array([b[1] for b in bounds])
    pins = np.array([DR_MIN, DR_Q25, DR_Q50, DR_Q75, DR_MAX])
    n_total = len(free) + len(pins)
    for _ in range(400):
        allv = np.concatenate([free, pins])
        m, s = allv.mean(), allv.std(ddof=1)
        if abs(m - DR_MEAN) < 1e-4 and abs(s - DR_STD) < 1e-4:
            break
        # Target second moment for the free entries given the pinned ones.
        want_sum = DR_MEAN * n_total - pins.sum()
        want_sq = (DR_STD**2 * (n_total - 1) + DR_MEAN**2 * n_total) - (pins**2).sum()
        mu_f = want_sum / len(free)
        var_f = want_sq / len(free) - mu_f**2
        cur_mu = free.mean()
        cur_sd = free.std()
        free = (free - cur_mu) * (math.sqrt(max(var_f, 1e-9)) / max(cur_sd, 1e-9)) + mu_f
        free = np.clip(free, lo_b, hi_b)
    v = np.sort(np.concatenate([free, pins]))
    assert abs(v.mean() - DR_MEAN) < 0.02 and abs(v.std(ddof=1) - DR_STD) < 0.04, (
        v.mean(),
        v.std(ddof=1),
    )
    assert (v < 0).sum() == N_DEC and (v > 0).sum() == N_INC
    assert v[19] == DR_Q25 and v[38] == DR_Q50 and v[57] == DR_Q75
    assert np.min(np.abs(v)) >= 0.05
    return v


def calibrate(vals, mean_t, std_t, lo, hi, pin_lo, pin_hi):
    """Affine-adjust vals toward the target moments, then pin the extremes
    exactly; a few rounds keep both approximately true."""
    v = np.array(vals, dtype=float)
    for _ in range(60):
        v = (v - v.mean()) * (std_t / max(v.std(ddof=1), 1e-12)) + mean_t
        v = np.clip(v, lo, hi)
        v[np.argmin(v)] = pin_lo
        v[np.argmax(v)] = pin_hi
    return v


def solve_weights(r, base, total, weighted_total, floor):
    """Find c >= floor with sum(c) = total and sum(c * r) = weighted_total.
    Mass is shifted between the extreme-ratio counties and the rest."""
    r = np.asarray(r, float)
    c = np.asarray(base, float)
    c = c / c.sum() * total
    target_mean = weighted_total / total
    assert r.min() + 0.2 < target_mean < r.max() - 0.2, (r.min(), target_mean, r.max())
    for _ in range(4000):
        c = np.maximum(c, floor)
        c = c / c.sum() * total
        err = weighted_total - float(c @ r)
        if abs(err) < 1e-7 * weighted_total:
            break
        pivot = int(np.argmax(r)) if err > 0 else int(np.argmin(r))
        rest = np.arange(len(r)) != pivot
        r_rest = float(c[rest] @ r[rest]) / float(c[rest].sum())
        delta = err / (r[pivot] - r_rest)
        delta = np.clip(delta, -0.2 * c[pivot], 0.25 * (total - c[pivot]))
        c[pivot] += delta
        c[rest] *= (total - c[pivot]) / c[rest].sum()
    assert abs(weighted_total - float(c @ r)) < 1e-5 * weighted_total
    out = np.floor(c).astype(int)
    short = int(total - out.sum())
    order = np.argsort(-(c - out))
    for i in range(short):
        out[order[i % len(out)]] += 1
    assert out.sum() == total and (out >= floor).all()
    return out


def integer_deaths(cases, ratios, death_total):
    d = np.rint(cases * ratios / 100.0).astype(int)
    resid = int(death_total - d.sum())
    order = np.argsort(-cases)
    i = 0
    step = 1 if resid > 0 else -1
    while resid != 0:
        k = order[i % len(order)]
        if d[k] + step >= 0:
            d[k] += step
            resid -= step
        i += 1
    return d


def spread(total, days, rng):
    """Nonnegative integer daily values of length `days` summing to total."""
    base = total // days
    rem = total - base * days
    out = np.full(days, base, dtype=int)
    if rem:
        out[rng.choice(days, size=rem, replace=False)] += 1
    return out


def build_series():
    labeled = pick_labeled()
    pool = dr_pool()

    # Partition the pool by state: the pinned minimum goes to Los Angeles,
    # the pinned maximum to an Oregon county; the rest are dealt to states
    # in a seeded round-robin within each sign group.
    negs = list(pool[pool < 0])
    poss = list(pool[pool > 0])
    negs.remove(DR_MIN)
    poss.remove(DR_MAX)
    RNG.shuffle(negs)
    RNG.shuffle(poss)
    dr_by_state = {
        "CA": [DR_MIN] + [negs.pop() for _ in range(DEC_N["CA"] - 1)],
        "OR": [negs.pop() for _ in range(DEC_N["OR"])],
        "WA": [negs.pop() for _ in range(DEC_N["WA"])],
    }
    inc_by_state = {
        "CA": [poss.pop() for _ in range(LABELED_N["CA"] - DEC_N["CA"])],
        "OR": [DR_MAX] + [poss.pop() for _ in range(LABELED_N["OR"] - DEC_N["OR"] - 1)],
        "WA": [poss.pop() for _ in range(LABELED_N["WA"] - DEC_N["WA"])],
    }
    assert not negs and not poss

    county_dr = {}
    county_label = {}
    rb = {}
    for st in ("CA", "OR", "WA"):
        fipses = labeled[st]
        by_pop = sorted(fipses, key=lambda f: -POP0[f])
        n_dec = DEC_N[st]
        dec_f = by_pop[:n_dec]
        inc_f = by_pop[n_dec:]
        # Small-magnitude deltas go to populous counties: their large case
        # denominators keep the integer realization near the target, while
        # small counties can absorb the coarse tail values.
        decs = sorted(dr_by_state[st], key=abs)
        dec_sorted = sorted(dec_f, key=lambda f: -POP0[f])
        if st == "CA":
            county_dr["06037"] = DR_MIN
            county_label["06037"] = "decrease"
            decs.remove(DR_MIN)
            dec_sorted.remove("06037")
        for f, v in zip(dec_sorted, decs):
            county_dr[f] = v
            county_label[f] = "decrease"
        incs = sorted(inc_by_state[st], key=abs)
        inc_sorted = sorted(inc_f, key=lambda f: -POP0[f])
        for f, v in zip(inc_sorted, incs):
            county_dr[f] = v
            county_label[f] = "increase"

        # Before-window county death ratios: enough headroom that the
        # after ratio stays positive, centered per state.
        center = {"CA": 24.0, "OR": 38.0, "WA": 25.0}[st]
        for f in fipses:
            head = max(0.0, -county_dr[f]) * 1.35 + 4.0
            val = RNG.normal(center, 6.0)
            rb[f] = float(np.clip(max(val, head), 4.0, 58.0))
    rb["06037"] = 78.0  # Los Angeles carries the bulk of CA's early mass

    # Integer state totals for the window sums (30-day windows).
    state_sums = {}
    for st, (r_b, r_a, dcases, dsign) in STATE_TARGETS.items():
        if st == "OR":
            scb = 30000
        elif st == "CA":
            scb = 134526
        else:
            scb = 34706
        sdb = int(round(scb * r_b / 100.0))
        sca = scb + int(round(dcases * WINDOW))
        sda = int(round(sca * r_a / 100.0))
        assert (sda - sdb) * dsign > 0, (st, sda - sdb, dsign)
        state_sums[st] = (scb, sdb, sca, sda)

    windows = {}
    for st, d0 in ORDER_DATES.items():
        windows[st] = (d0 - timedelta(days=WINDOW), d0)

    cb, ca, db, da = {}, {}, {}, {}
    for st in ("CA", "OR", "WA"):
        fipses = labeled[st]
        scb, sdb, sca, sda = state_sums[st]
        r_before = np.array([rb[f] for f in fipses])
        r_after = np.array([rb[f] + county_dr[f] for f in fipses])
        assert (r_after > 1.0).all()
        base_b = np.array([POP0[f] ** 0.85 for f in fipses])
        surge = RNG.uniform(1.6, 3.6, len(fipses))
        if st == "CA":
            surge[fipses.index("06037")] = 0.45
        if st == "WA":
            surge[fipses.index("53033")] = 0.7
        base_a = base_b * surge
        c_b = solve_weights(r_before, base_b, scb, 100 * sdb, 300)
        c_a = solve_weights(r_after, base_a, sca, 100 * sda, 300)
        d_b = integer_deaths(c_b, r_before, sdb)
        d_a = integer_deaths(c_a, r_after, sda)

        # Per-county repair: nudge the after-window death sum by whole
        # units toward the target delta, compensating on the largest
        # county so the state totals stay exact.
        slack = fipses.index(max(fipses, key=lambda f: POP0[f]))
        for i, f in enumerate(fipses):
            if i == slack:
                continue
            target = county_dr[f]
            best, best_err = d_a[i], None
            for cand in range(max(0, d_a[i] - 3), d_a[i] + 4):
                got = 100.0 * (cand / c_a[i] - d_b[i] / c_b[i])
                if got * target <= 0:
                    continue
                err = abs(got - target)
                if best_err is None or err < best_err:
                    best, best_err = cand, err
            assert best_err is not None, (f, target)
            d_a[slack] += d_a[i] - best
            d_a[i] = best
        assert d_a[slack] >= 0 and d_a.sum() == sda

        for i, f in enumerate(fipses):
            cb[f], ca[f], db[f], da[f] = int(c_b[i]), int(c_a[i]), int(d_b[i]), int(d_a[i])

    # Achieved per-county deltas after integer rounding.
    achieved = {
        f: 100.0 * (da[f] / ca[f] - db[f] / cb[f]) for st in labeled for f in labeled[st]
    }
    for f, v in achieved.items():
        assert v * county_dr[f] > 0, (f, v, county_dr[f])
    vals = np.array(sorted(achieved.values()))
    assert abs(vals.mean() - DR_MEAN) <= 0.05, vals.mean()
    assert abs(vals.std(ddof=1) - DR_STD) <= 0.10, vals.std(ddof=1)
    assert abs(vals[0] - DR_MIN) <= 0.05 and abs(vals[-1] - DR_MAX) <= 0.05

    return labeled, county_dr, county_label, achieved, cb, ca, db, da, windows


def daterange():
    days = []
    d = START
    while d <= END:
        days.append(d)
        d += timedelta(days=1)
    return days


def cumulative_rows(labeled, cb, ca, db, da, windows):
    days = daterange()
    index = {d: i for i, d in enumerate(days)}
    all_fips = [f for f, _, _, _ in COUNTIES]
    zero_from = date(2020, 4, 28)
    zero_to = date(2020, 7, 31)

    cases_rows, deaths_rows = {}, {}
    bump_targets = set(RNG.choice(sorted(set(all_fips) - set(sum(labeled.values(), [])) - DROPPED), 10, replace=False))

    for f in all_fips:
        st = STATE_OF[f]
        before_start, anchor = windows[st]
        after_end = anchor + timedelta(days=WINDOW - 1)
        c = np.zeros(len(days), dtype=int)
        d = np.zeros(len(days), dtype=int)
        if f in cb:  # labeled: exact window sums
            daily_c = np.zeros(len(days), dtype=int)
            daily_d = np.zeros(len(days), dtype=int)
            first_case = START + timedelta(days=int(RNG.integers(45, 85)))
            ramp_days = (before_start - first_case).days
            base_cases = max(2, int(round(cb[f] * 0.9)))
            if ramp_days > 0:
                daily_c[index[first_case] : index[before_start]] = spread(
                    base_cases, ramp_days, RNG
                )
            daily_c[index[before_start] : index[anchor]] = spread(cb[f], WINDOW, RNG)
            daily_c[index[anchor] : index[after_end] + 1] = spread(ca[f], WINDOW, RNG)
            tail_days = (END - after_end).days
            tail_cases = int(round(ca[f] / WINDOW * 0.75 * tail_days))
            if tail_days > 0 and tail_cases > 0:
                daily_c[index[after_end] + 1 :] = spread(tail_cases, tail_days, RNG)

            first_death = first_case + timedelta(days=int(RNG.integers(10, 25)))
            dramp = (before_start - first_death).days
            base_deaths = max(0, int(round(db[f] * 0.7)))
            if dramp > 0 and base_deaths > 0:
                daily_d[index[first_death] : index[before_start]] = spread(
                    base_deaths, dramp, RNG
                )
            daily_d[index[before_start] : index[anchor]] = spread(db[f], WINDOW, RNG)
            daily_d[index[anchor] : index[after_end] + 1] = spread(da[f], WINDOW, RNG)
            tail_deaths = int(round(da[f] / WINDOW * 0.7 * tail_days))
            if tail_days > 0 and tail_deaths > 0:
                daily_d[index[after_end] + 1 :] = spread(tail_deaths, tail_days, RNG)
            c = np.cumsum(daily_c)
            d = np.cumsum(daily_d)
        else:
            # Dormant county: a handful of early cases, flat through every
            # window, zero deaths; some get a late-summer bump.
            early = int(RNG.integers(0, 13))
            if early > 0:
                up = index[zero_from - timedelta(days=int(RNG.integers(5, 40)))]
                c[up:] = early
            if f in bump_targets:
                c[index[zero_to + timedelta(days=2)] :] += int(RNG.integers(1, 4))
        cases_rows[f] = c
        deaths_rows[f] = d

    # Two deliberate cumulative corrections outside every window: the
    # dataset builder clips the negative daily values and counts them.
    for f in ("06031", "53015"):
        i = index[date(2020, 8, 2)]
        cases_rows[f][i] = max(0, cases_rows[f][i - 1] - 3)
        cases_rows[f][i + 1 :] = np.maximum(cases_rows[f][i + 1 :], cases_rows[f][i])
    return days, cases_rows, deaths_rows


def covariates(labeled, county_label):
    lab = sum(labeled.values(), [])
    dec = [f for f in lab if county_label[f] == "decrease"]
    inc = [f for f in lab if county_label[f] == "increase"]

    # Populations: rescale the unpinned labeled counties so the labeled
    # mean hits the published value; keep relative order.
    pop = dict(POP0)
    pop["06037"], pop["41023"] = POP_MAX, POP_MIN
    others = [f for f in lab if f not in ("06037", "41023")]
    target_rest = POP_MEAN * len(lab) - POP_MAX - POP_MIN
    gamma = target_rest / sum(pop[f] for f in others)
    for f in others:
        pop[f] = max(POP_MIN + 500, int(round(POP0[f] * gamma)))
    drift = int(POP_MEAN * len(lab)) - sum(pop[f] for f in lab)
    pop[others[0]] += drift

    def class_draw(mu_dec, mu_inc, sd_dec, sd_inc):
        out = {}
        for f in dec:
            out[f] = RNG.normal(mu_dec, sd_dec)
        for f in inc:
            out[f] = RNG.normal(mu_inc, sd_inc)
        return out

    income_raw = class_draw(76500, 52000, 15000, 11000)
    income_cal = calibrate(
        [income_raw[f] for f in lab], INC_MEAN, INC_STD, INC_MIN, INC_MAX, INC_MIN, INC_MAX
    )
    income = {f: int(round(v)) for f, v in zip(lab, income_cal)}

    el_raw = class_draw(0.888, 0.796, 0.048, 0.054)
    el_cal = calibrate([el_raw[f] for f in lab], EL_MEAN, EL_STD, EL_MIN, EL_MAX, EL_MIN, EL_MAX)
    el = {f: round(float(v), 3) for f, v in zip(lab, el_cal)}

    mask = {}
    m = MASK_MOMENTS
    raw = {
        "never": class_draw(0.0225, 0.0425, 0.015, 0.017),
        "rarely": class_draw(0.023, 0.042, 0.022, 0.026),
        "sometimes": class_draw(0.054, 0.069, 0.026, 0.028),
        "frequently": class_draw(0.152, 0.198, 0.040, 0.042),
        "always": class_draw(0.752, 0.638, 0.070, 0.075),
    }
    # A shared per-county factor correlates the four non-ALWAYS shares so
    # their sum (and therefore the residual ALWAYS column) keeps the
    # published spread after the sum-to-one normalization.
    lam = {f: RNG.normal(0.0, 0.05) for f in lab}
    loading = {"never": 0.4, "rarely": 0.6, "sometimes": 0.6, "frequently": 1.0}
    for key, k in loading.items():
        for f in lab:
            raw[key][f] += k * lam[f]
    cols = {}
    for key in raw:
        mean_t, std_t, lo, hi = m[key]
        cal = calibrate([raw[key][f] for f in lab], mean_t, std_t, lo, hi, lo, hi)
        cols[key] = dict(zip(lab, cal))
    for f in lab:
        vec = np.array([cols[k][f] for k in ("never", "rarely", "sometimes", "frequently", "always")])
        vec = np.maximum(vec, 0.0)
        vec = vec / vec.sum()
        r = np.round(vec, 3)
        r[4] = round(1.0 - r[:4].sum(), 3)
        mask[f] = r
    # Pin the published minimum of the ALWAYS share on exactly one county.
    amin = min(mask, key=lambda f: mask[f][4])
    delta = mask[amin][4] - m["always"][2]
    mask[amin][4] = m["always"][2]
    mask[amin][3] = round(mask[amin][3] + delta, 3)
    for f in lab:
        if f != amin and mask[f][4] < m["always"][2] + 0.004:
            shift = m["always"][2] + 0.004 - mask[f][4]
            mask[f][4] = round(mask[f][4] + shift, 3)
            mask[f][3] = round(mask[f][3] - shift, 3)

    # Dormant and dropped counties: small-county covariate profile.
    rest = [f for f, _, _, _ in COUNTIES if f not in lab]
    for f in rest:
        pop.setdefault(f, POP0[f])
        income[f] = int(round(np.clip(RNG.normal(51500, 6500), 41000, 76000)))
        el[f] = round(float(np.clip(RNG.normal(0.80, 0.05), 0.66, 0.93)), 3)
        vec = np.array(
            [
                max(0.004, RNG.normal(0.045, 0.018)),
                max(0.0, RNG.normal(0.045, 0.022)),
                max(0.006, RNG.normal(0.075, 0.025)),
                max(0.08, RNG.normal(0.20, 0.04)),
                max(0.33, RNG.normal(0.63, 0.07)),
            ]
        )
        vec = vec / vec.sum()
        r = np.round(vec, 3)
        r[4] = round(1.0 - r[:4].sum(), 3)
        if r[4] < 0.314:
            d = 0.314 - r[4]
            r[4] = round(r[4] + d, 3)
            r[3] = round(r[3] - d, 3)
        mask[f] = r
    return pop, income, el, mask


# Rows outside the three-state scope exercise the state filter, and the
# FIPS-0 rows exercise the unallocated-row drop.
EXTRA_SERIES = [
    ("00000", "Statewide Unallocated", "CA", "06"),
    ("00000", "Statewide Unallocated", "OR", "41"),
    ("00000", "Statewide Unallocated", "WA", "53"),
    ("16001", "Ada County", "ID", "16"),
]
EXTRA_CENSUS = [("16001", 481587, 71934, 93.4), ("04013", 4485414, 64468, 87.1)]
EXTRA_MASK = [("16001", 0.053, 0.074, 0.115, 0.207, 0.551), ("04013", 0.02, 0.03, 0.072, 0.156, 0.722)]


def write_files(days, cases_rows, deaths_rows, pop, income, el, mask):
    os.makedirs(OUT, exist_ok=True)
    hdr = ["countyFIPS", "County Name", "State", "StateFIPS"] + [
        f"{d.month}/{d.day}/{d.strftime('%y')}" for d in days
    ]

    def series_file(name, rows):
        path = os.path.join(OUT, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(hdr)
            for f, cname, st, sf in EXTRA_SERIES:
                base = 40 if f == "00000" else 310
                vals = np.minimum(np.maximum((np.arange(len(days)) - 70) * 2, 0), base)
                if "death" in name:
                    vals = vals // 12
                w.writerow([f, cname, st, sf] + vals.tolist())
            for f, cname, st, _ in COUNTIES:
                sf = f[:2]
                w.writerow([f, cname, st, sf] + rows[f].tolist())
        return path

    series_file("covid_confirmed_usafacts.csv", cases_rows)
    series_file("covid_deaths_usafacts.csv", deaths_rows)

    with open(os.path.join(OUT, "census_county_data.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "population", "median_income", "hs_completion"])
        for f, _, _, _ in COUNTIES:
            if f in MISSING_FROM_CENSUS:
                continue
            w.writerow([f, pop[f], income[f], round(el[f] * 100.0, 1)])
        for f, p, inc_v, hs in EXTRA_CENSUS:
            w.writerow([f, p, inc_v, hs])

    with open(os.path.join(OUT, "mask-use-by-county.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["COUNTYFP", "NEVER", "RARELY", "SOMETIMES", "FREQUENTLY", "ALWAYS"])
        for f, _, _, _ in COUNTIES:
            if f in MISSING_FROM_MASK:
                continue
            n, r, s, fr, a = mask[f]
            w.writerow([f, f"{n:.3f}", f"{r:.3f}", f"{s:.3f}", f"{fr:.3f}", f"{a:.3f}"])
        for f, n, r, s, fr, a in EXTRA_MASK:
            w.writerow([f, f"{n:.3f}", f"{r:.3f}", f"{s:.3f}", f"{fr:.3f}", f"{a:.3f}"])


def verify(labeled, county_label, windows):
    """Re-derive everything from the written files and check the targets."""
    days = daterange()
    index = {d: i for i, d in enumerate(days)}

    def read_series(name):
        out = {}
        with open(os.path.join(OUT, name)) as fh:
            rd = csv.reader(fh)
            next(rd)
            for row in rd:
                if row[0] == "00000" or row[2] not in ("CA", "OR", "WA"):
                    continue
                out[row[0]] = np.array([int(x) for x in row[4:]])
        return out

    cases = read_series("covid_confirmed_usafacts.csv")
    deaths = read_series("covid_deaths_usafacts.csv")
    census, masks = {}, {}
    with open(os.path.join(OUT, "census_county_data.csv")) as fh:
        rd = csv.reader(fh)
        next(rd)
        for row in rd:
            census[row[0]] = (int(row[1]), float(row[2]), float(row[3]) / 100.0)
    with open(os.path.join(OUT, "mask-use-by-county.csv")) as fh:
        rd = csv.reader(fh)
        next(rd)
        for row in rd:
            vals = [float(x) for x in row[1:]]
            assert abs(sum(vals) - 1.0) <= 0.02, row
            masks[row[0]] = vals

    joined = sorted(f for f in cases if f in deaths and f in census and f in masks)
    assert len(joined) == 130, len(joined)

    def window_mean(series, st, side):
        before_start, anchor = windows[st]
        daily = np.diff(series)
        daily = np.maximum(daily, 0)
        if side == "before":
            lo, hi = index[before_start], index[anchor]
        else:
            lo, hi = index[anchor], index[anchor + timedelta(days=WINDOW)]
        return float(daily[lo - 1 : hi - 1].mean())

    dr = {}
    for f in joined:
        st = STATE_OF[f]
        mcb, mca = window_mean(cases[f], st, "before"), window_mean(cases[f], st, "after")
        mdb, mda = window_mean(deaths[f], st, "before"), window_mean(deaths[f], st, "after")
        before = 100.0 * mdb / mcb if mcb > 0 else 0.0
        after = 100.0 * mda / mca if mca > 0 else 0.0
        dr[f] = after - before

    dec = sorted(f for f in joined if dr[f] < 0)
    inc = sorted(f for f in joined if dr[f] > 0)
    zero = sorted(f for f in joined if dr[f] == 0)
    assert (len(dec), len(inc), len(zero)) == (N_DEC, N_INC, N_ZERO), (len(dec), len(inc), len(zero))
    for f in zero:
        st = STATE_OF[f]
        assert window_mean(cases[f], st, "before") == 0 and window_mean(cases[f], st, "after") == 0
        assert window_mean(deaths[f], st, "before") == 0 and window_mean(deaths[f], st, "after") == 0

    lab = dec + inc
    v = np.array([dr[f] for f in lab])
    sv = np.sort(v)
    checks = {
        "dr mean": (v.mean(), DR_MEAN, 0.05),
        "dr std": (v.std(ddof=1), DR_STD, 0.1),
        "dr min": (v.min(), DR_MIN, 0.25),
        "dr max": (v.max(), DR_MAX, 0.25),
        "dr q25": (np.quantile(sv, 0.25), DR_Q25, 0.15),
        "dr q50": (np.quantile(sv, 0.50), DR_Q50, 0.12),
        "dr q75": (np.quantile(sv, 0.75), DR_Q75, 0.15),
    }
    pops = np.array([census[f][0] for f in lab], float)
    incomes = np.array([census[f][1] for f in lab])
    els = np.array([census[f][2] for f in lab])
    checks["pop mean"] = (pops.mean(), POP_MEAN, 0.01 * POP_MEAN)
    checks["pop min"] = (pops.min(), POP_MIN, 0)
    checks["pop max"] = (pops.max(), POP_MAX, 0)
    checks["income mean"] = (incomes.mean(), INC_MEAN, 300)
    checks["income std"] = (incomes.std(ddof=1), INC_STD, 600)
    checks["el mean"] = (els.mean(), EL_MEAN, 0.01)
    checks["el std"] = (els.std(ddof=1), EL_STD, 0.012)
    a_all = np.array([masks[f][4] for f in joined])
    checks["always min(joined)"] = (a_all.min(), MASK_MOMENTS["always"][2], 0)
    for i, key in enumerate(("never", "rarely", "sometimes", "frequently", "always")):
        col = np.array([masks[f][i] for f in lab])
        mean_t, std_t, _, _ = MASK_MOMENTS[key]
        checks[f"{key} mean"] = (col.mean(), mean_t, 0.012)
        checks[f"{key} std"] = (col.std(ddof=1), std_t, 0.015)
    failures = [(k, got, want) for k, (got, want, tol) in checks.items() if abs(got - want) > tol]
    for k, (got, want, tol) in sorted(checks.items()):
        print(f"  {k:22s} got {got:12.4f} want {want:12.4f} tol {tol:g}")
    assert not failures, failures

    # State-level aggregation.
    for st, (r_b, r_a, dcases, dsign) in STATE_TARGETS.items():
        members = [f for f in joined if STATE_OF[f] == st]
        csum = np.sum([np.maximum(np.diff(cases[f]), 0) for f in members], axis=0)
        dsum = np.sum([np.maximum(np.diff(deaths[f]), 0) for f in members], axis=0)
        before_start, anchor = windows[st]
        lo, hi = index[before_start] - 1, index[anchor] - 1
        cb_m, db_m = csum[lo:hi].mean(), dsum[lo:hi].mean()
        lo2, hi2 = hi, hi + WINDOW
        ca_m, da_m = csum[lo2:hi2].mean(), dsum[lo2:hi2].mean()
        got_b, got_a = 100 * db_m / cb_m, 100 * da_m / ca_m
        pct = 100.0 * (got_a - got_b) / got_b
        want_pct = 100.0 * (r_a - r_b) / r_b
        print(
            f"  state {st}: before {got_b:.2f}/{r_b} after {got_a:.2f}/{r_a} "
            f"pct {pct:+.2f} (want {want_pct:+.2f}) dcases {ca_m - cb_m:+.2f} ddeaths {da_m - db_m:+.3f}"
        )
        assert abs(got_b - r_b) < 0.05 and abs(got_a - r_a) < 0.05
        assert abs((ca_m - cb_m) - dcases) < 0.5
        assert (da_m - db_m) * dsign > 0

    # Group contrasts and correlation signs.
    is_dec = np.array([1.0 if f in dec else 0.0 for f in lab])
    a_lab = np.array([masks[f][4] for f in lab])
    assert a_lab[is_dec == 1].mean() > a_lab[is_dec == 0].mean() + 0.02
    assert pops[is_dec == 1].mean() > pops[is_dec == 0].mean()
    feats = {
        "population": pops, "median_income": incomes, "education_level": els,
        "mask_never": np.array([masks[f][0] for f in lab]),
        "mask_rarely": np.array([masks[f][1] for f in lab]),
        "mask_sometimes": np.array([masks[f][2] for f in lab]),
        "mask_frequently": np.array([masks[f][3] for f in lab]),
        "mask_always": a_lab,
    }
    want_sign = {"population": -1, "median_income": -1, "education_level": -1,
                 "mask_never": 1, "mask_rarely": 1, "mask_sometimes": 1,
                 "mask_frequently": 1, "mask_always": -1}
    for k, col in feats.items():
        r = np.corrcoef(col, v)[0, 1]
        print(f"  corr {k:16s} {r:+.3f}")
        assert r * want_sign[k] > 0, (k, r)

    # Learnability proxy: quick sklearn sweep over 20 seeds.
    try:
        from sklearn.naive_bayes import GaussianNB
        from sklearn.tree import DecisionTreeClassifier
        from sklearn.ensemble import RandomForestClassifier, ExtraTreesClassifier, GradientBoostingClassifier
        from sklearn.neighbors import KNeighborsClassifier
        from sklearn.svm import SVC
        from sklearn.linear_model import LogisticRegression
    except ImportError:
        print("  (sklearn unavailable; skipping learnability proxy)")
        return
    X = np.column_stack([feats[k] for k in feats])
    y = (is_dec == 0).astype(int)  # increase = 1
    models = {
        "nb": lambda: GaussianNB(),
        "lr": lambda: LogisticRegression(C=1000, max_iter=10000),
        "knn": lambda: KNeighborsClassifier(8),
        "dt": lambda: DecisionTreeClassifier(max_depth=4, random_state=0),
        "rf": lambda: RandomForestClassifier(10, max_depth=7, max_features=2, random_state=0),
        "et": lambda: ExtraTreesClassifier(200, criterion="entropy", min_samples_leaf=2, random_state=0),
        "gb": lambda: GradientBoostingClassifier(n_estimators=119, learning_rate=0.0975, max_depth=4, subsample=0.6232, random_state=0),
        "svm": lambda: SVC(C=1.0, gamma="scale"),
    }
    meds = {}
    for name, mk in models.items():
        accs = []
        for seed in range(20):
            rs = np.random.default_rng(seed)
            idx = rs.permutation(len(y))
            te = idx[:16]
            tr = idx[16:]
            mn, mx = X[tr].min(0), X[tr].max(0)
            span = np.where(mx > mn, mx - mn, 1.0)
            Xs = (X - mn) / span
            mdl = mk().fit(Xs[tr], y[tr])
            accs.append(float((mdl.predict(Xs[te]) == y[te]).mean()))
        meds[name] = float(np.median(accs))
        print(f"  proxy {name:4s} median {meds[name]:.3f} min {min(accs):.3f}")
    for name in ("nb", "dt", "rf", "gb"):
        assert meds[name] >= 0.80, (name, meds[name])
    for name in meds:
        assert meds[name] >= 0.70, (name, meds[name])


def main():
    labeled, county_dr, county_label, achieved, cb, ca, db, da, windows = build_series()
    days, cases_rows, deaths_rows = cumulative_rows(labeled, cb, ca, db, da, windows)
    pop, income, el, mask = covariates(labeled, county_label)
    write_files(days, cases_rows, deaths_rows, pop, income, el, mask)
    print("verification:")
    verify(labeled, county_label, windows)
    print("snapshot written to", os.path.normpath(OUT))


if __name__ == "__main__":
    main()
