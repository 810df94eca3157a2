"""Write the 4000/1000 MNIST subset as gzipped IDX files under data/mnist5k/.

The images come from the 5000-example MNIST sample shipped inside mlxtend
(``pip install mlxtend``), so no network access is needed.
"""
import argparse

from pl_lab.experiments import MNIST_DIR, prepare_mnist_subset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(MNIST_DIR))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    out = prepare_mnist_subset(args.out, args.seed)
    print(f"wrote IDX files to {out}")


if __name__ == "__main__":
    main()
