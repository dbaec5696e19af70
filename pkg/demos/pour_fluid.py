"""Drop a 1000-particle fluid block into an open-top container.

After settling, the kernel-estimated density should sit near the rest
density and every particle should remain inside the walls.
"""
import numpy as np

from softsim.core import NeighborGrid
from softsim.engine import Scene, run
from softsim.fluid import compute_densities, make_fluid_box
from softsim.params import MaterialKind, PhysicsParams
from softsim.rigid import Plane, RigidCollider


def main() -> None:
    params = PhysicsParams.defaults(MaterialKind.Fluid)
    scene = Scene(dt=1.0 / 60.0, iterations=6)
    pts = make_fluid_box(10, 10, 10, 2 * params.fluid_rest_offset, origin=(0.1, 0.1, 0.1))
    block = scene.add_fluid(pts, params)
    scene.colliders.append(RigidCollider(Plane(), contact_offset=0.1))  # floor
    for normal, offset in [((1, 0, 0), 0.0), ((-1, 0, 0), -2.2),
                           ((0, 1, 0), 0.0), ((0, -1, 0), -2.2)]:
        scene.colliders.append(
            RigidCollider(Plane(np.array(normal, float), offset), contact_offset=0.1))

    print(f"simulating {len(scene.particles)} fluid particles for 500 steps...")
    run(scene, 500)

    grid = NeighborGrid(scene.particles.positions, block.kernel_radius)
    starts, nbrs = grid.neighbor_lists(block.kernel_radius, int(params.max_neighborhood))
    rho = compute_densities(block, scene.particles.positions, starts, nbrs)
    p = scene.particles.positions
    print(f"mean density {rho.mean():.1f} kg/m^3 (rest {block.rest_density:.0f}, "
          f"error {100 * abs(rho.mean() / block.rest_density - 1):.2f}%)")
    print(f"fluid extent x [{p[:, 0].min():.2f}, {p[:, 0].max():.2f}] "
          f"y [{p[:, 1].min():.2f}, {p[:, 1].max():.2f}] "
          f"surface height {p[:, 2].max():.2f} m")


if __name__ == "__main__":
    main()
