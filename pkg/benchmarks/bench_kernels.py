"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 50,200,800]

Prints one CSV row per (kernel, size, backend) with the best-of-N wall time
and the speedup of the native backend over the Python one.
"""
import argparse
import sys
import timeit

import numpy as np

from rankmatch import kernels


def _boxes(rng, n):
    xy = rng.uniform(0.0, 0.8, (n, 2))
    wh = rng.uniform(0.02, 0.2, (n, 2))
    return np.hstack([xy, xy + wh])


def _cases(rng, n):
    boxes = _boxes(rng, n)
    other = _boxes(rng, n)
    cats = rng.integers(0, 3, n)
    order = np.argsort(-rng.random(n), kind="stable")
    iou = kernels.iou_matrix(boxes, other)
    side = max(2, n // 4)  # the assignment is cubic; keep it in a comparable time range
    cost = rng.random((side, side))
    return {
        "iou_matrix": lambda: kernels.iou_matrix(boxes, other),
        "giou_matrix": lambda: kernels.giou_matrix(boxes, other),
        "nms_ordered": lambda: kernels.nms_ordered(boxes, cats, order, 0.5),
        "lsa_square": lambda: kernels.lsa_square(cost),
        "claim_matches": lambda: kernels.claim_matches(iou, 0.5),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", default="50,200,800")
    args = parser.parse_args(argv)
    backends = kernels.available_backends()
    if "native" not in backends:
        print("native extension not built; timing the Python backend only", file=sys.stderr)
    print("kernel,n,backend,seconds,speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        cases = _cases(np.random.default_rng(n), n)
        for name, fn in cases.items():
            times = {}
            for backend in backends:
                with kernels.use_backend(backend):
                    fn()  # warm-up
                    number = 3 if backend == "python" else 20
                    times[backend] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            for backend in backends:
                speedup = times["python"] / times[backend] if "python" in times else float("nan")
                print(f"{name},{n},{backend},{times[backend]:.3e},{speedup:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
