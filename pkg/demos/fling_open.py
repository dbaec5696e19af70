"""Crumple a cloth into a pile, then fling it open with two grippers.

Coverage (fraction of the flat silhouette the cloth covers from above) drops
when the cloth is piled up and recovers after the two-handed fling - the
classic dynamic unfolding primitive.
"""
from softsim.scripted import crumple_and_fling_demo


def main() -> None:
    result = crumple_and_fling_demo(seed=11)
    before = result.metrics["coverage_before"]
    after = result.metrics["coverage_after"]
    print(f"coverage crumpled: {before:.3f}")
    print(f"coverage after fling: {after:.3f}")
    print("fling recovered coverage" if after >= before else "fling lost coverage")


if __name__ == "__main__":
    main()
