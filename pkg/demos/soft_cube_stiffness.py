"""Rest a soft elastic cube on the ground at three stiffness settings.

A compliant cube sags under its own weight; stiffer material holds its rest
height.  Compression (rest height minus settled height) decreases
monotonically with Young's modulus.
"""
from softsim.engine import Scene, run
from softsim.fem import ElasticMaterial, make_tet_lattice
from softsim.rigid import Plane, RigidCollider


def main() -> None:
    rest_height = 0.12
    for young in (1e3, 1e4, 1.5e4):
        scene = Scene(dt=1e-3, iterations=2)
        pos, tets = make_tet_lattice(3, 3, 3, 0.04)
        mat = ElasticMaterial(young_modulus=young, poisson_ratio=0.3,
                              vertex_velocity_damping=5.0, density=1000.0)
        scene.add_soft_body(pos, tets, mat)
        scene.colliders.append(RigidCollider(Plane(), contact_offset=0.005))
        run(scene, 2000)
        height = scene.particles.positions[:, 2].max()
        print(f"E = {young:8.0f} Pa -> settled height {height:.4f} m "
              f"(compression {rest_height - height:+.4f} m)")


if __name__ == "__main__":
    main()
