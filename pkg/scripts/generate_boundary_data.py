#!/usr/bin/env python3
"""
Generate random smooth Dirichlet data for solver experiments.

Each dataset is a trigonometric polynomial in the boundary angle,
a_0 + Σ_k (a_k cos kθ + b_k sin kθ) with |a_k|, |b_k| <= scale/k,
written as a vertex,value CSV for the boundary vertices of the mesh
that the same domain and h produce. Feed it back with --boundary-csv.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

# Add src directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root / "src"))

from plap_freq.core.artifacts import write_boundary_csv, write_mesh_text
from plap_freq.core.mesh import Domain, build_mesh
from plap_freq.core.solver import random_trig_coefficients, trig_boundary_values


def generate_datasets(
    domain: Domain,
    h: float,
    count: int = 4,
    n_modes: int = 6,
    seed: int = 0,
    mean: float = 1.0,
    scale: float = 0.3,
) -> tuple[object, list[tuple[np.ndarray, np.ndarray]]]:
    """
    Build the mesh once and draw ``count`` coefficient sets.

    Returns:
        The mesh and a list of (coefficients, boundary values) pairs
    """
    mesh = build_mesh(domain, h)
    datasets = []
    for index in range(count):
        coeffs = random_trig_coefficients(n_modes, seed=seed + index, mean=mean, scale=scale)
        datasets.append((coeffs, trig_boundary_values(mesh, coeffs)))
    return mesh, datasets


def main():
    parser = argparse.ArgumentParser(description="Generate random smooth boundary data CSVs")
    parser.add_argument("--output", type=Path, default=Path("./boundary_data"), help="Output directory")
    parser.add_argument("--count", type=int, default=4, help="Number of datasets (default: 4)")
    parser.add_argument("--modes", type=int, default=6, help="Trigonometric modes per dataset (default: 6)")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the first dataset (default: 0)")
    parser.add_argument("--mean", type=float, default=1.0, help="Constant term a_0 (default: 1.0)")
    parser.add_argument("--scale", type=float, default=0.3, help="Mode amplitude scale (default: 0.3)")
    parser.add_argument("--h", type=float, default=0.05, help="Mesh size (default: 0.05)")
    parser.add_argument("--r-outer", type=float, default=1.0, help="Disc radius (default: 1.0)")
    parser.add_argument("--r-inner", type=float, default=0.0, help="Annulus hole radius; 0 for a disc")

    args = parser.parse_args()

    if args.r_inner > 0.0:
        domain = Domain.annulus(args.r_inner, args.r_outer)
    else:
        domain = Domain.disc(args.r_outer)

    print("Generating boundary data...")
    print(f"  Domain: {domain.kind.value}, R={args.r_outer}, r={args.r_inner}, h={args.h}")
    print(f"  Datasets: {args.count}, modes: {args.modes}, seed: {args.seed}")

    mesh, datasets = generate_datasets(
        domain, args.h, args.count, args.modes, args.seed, args.mean, args.scale
    )

    args.output.mkdir(parents=True, exist_ok=True)
    write_mesh_text(args.output / "mesh.txt", mesh)
    index = []
    for i, (coeffs, values) in enumerate(datasets):
        path = write_boundary_csv(args.output / f"boundary_{i:03d}.csv", mesh, values)
        index.append(
            {
                "file": path.name,
                "seed": args.seed + i,
                "coefficients": coeffs.tolist(),
                "min": float(values.min()),
                "max": float(values.max()),
            }
        )
        print(f"  {path.name}: range [{values.min():.4f}, {values.max():.4f}]")

    meta_dir = args.output / "meta"
    meta_dir.mkdir(exist_ok=True)
    with open(meta_dir / "info.json", "w") as f:
        json.dump(
            {"domain": domain.kind.value, "r_outer": args.r_outer, "r_inner": args.r_inner,
             "h": args.h, "boundary_vertices": int(mesh.boundary_index.size), "datasets": index},
            f,
            indent=2,
        )

    print(f"\nSaved {len(datasets)} datasets to: {args.output}")


if __name__ == "__main__":
    main()
