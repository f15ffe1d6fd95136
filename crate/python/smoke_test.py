"""Smoke test for the molfilter extension module.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/python/Cargo.toml`.
"""
import math
import tempfile

import molfilter


def main():
    p = molfilter.ChannelParams(n_tx=1e5)
    t_ref = p.reference_time()
    assert 3e-5 < t_ref < 4e-4, t_ref

    cir = molfilter.build_cir(p)
    assert (cir.l_taps, cir.m_samples) == (3, 6)

    cov = molfilter.interference_covariance(cir, p.c_ext)
    assert all(abs(cov[i][j] - cov[j][i]) < 1e-9 for i in range(6) for j in range(6))

    best = molfilter.optimal_sinr(cir, p.c_ext)
    for kind in ("matched", "sum", "correlator", "peak"):
        w = molfilter.design_filter(kind, cir, p.c_ext)
        s = molfilter.sinr(w, cir, p.c_ext)
        assert s <= best * (1 + 1e-9), (kind, s, best)
        xi = molfilter.optimize_threshold(w, cir, p.c_ext)
        ber = molfilter.analytical_ber(w, cir, p.c_ext, xi)
        mc = molfilter.simulate(w, xi, cir, p.c_ext, trials=20000, seed=7)
        assert 0.0 <= ber <= 0.5 and 0.0 <= mc["ber"] <= 1.0
        print(f"{kind:>10}  sinr={s:9.4f}  sinr_mc={mc['sinr']:9.4f}  ber={ber:.3e}  ber_mc={mc['ber']:.3e}")

    w = molfilter.design_filter("matched", cir, p.c_ext)
    assert w[0] < 0 and w[1] < 0.05

    assert math.isclose(molfilter.q_function(1.0), 0.15865525393145705, rel_tol=1e-12)

    with tempfile.TemporaryDirectory() as d:
        files = molfilter.run_sweep(out_dir=d, trials=500)
        assert len(files) == 8, files

    try:
        molfilter.design_filter("fancy", cir, p.c_ext)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
    print("ok")


if __name__ == "__main__":
    main()
