"""Tour of the geometric primitives on a sphere, a torus, and a graph.

Every quantity the time steppers consume is shown here directly: the tangent
projector P(x), the second fundamental form II, the Ito drift correction
A(x) = (1/2) tr II, the exponential map, the nearest-point projection, and
the bump-function extension that turns fields on the manifold into globally
defined fields on R^3.
"""

import numpy as np

import manifold_sde as ms

np.set_printoptions(precision=6, suppress=True)

print("=== sphere S^2 ===")
sphere = ms.Sphere(3)
x = np.array([0.0, 0.0, 1.0])
print("P(north pole) =\n", sphere.projection(x))
u = np.array([1.0, 0.0, 0.0])
print("II(u, u)      =", sphere.second_fundamental_form(x, u, u), "(= -|u|^2 x)")
print("A(x)          =", sphere.ito_drift(x), "(= -(m/2) x with m = 2)")
v = np.array([0.0, np.pi / 2, 0.0])
print("exp_x(pi/2 e2)=", sphere.exp(np.array([1.0, 0.0, 0.0]), v))

print()
print("=== torus (R=2, r=0.5) as a level set ===")
torus = ms.named_manifold("torus")
p = np.array([2.5, 0.0, 0.0])
print("membership residual at (2.5, 0, 0):", float(torus.membership_residual(p)))
print("A(p) =", torus.ito_drift(p), " (normal, pointing toward the tube axis)")
y = p + np.array([0.15, 0.0, 0.1])
py = torus.project_point(y)
print("pi(y) back on the surface, residual:",
      float(torus.membership_residual(py)))
print("y - pi(y) is normal:",
      float(np.linalg.norm(torus.apply_projection(py, y - py))))

# the Taylor expansion of the exponential map: exp_x(v) ~ x + v + II(v,v)/2
rng = np.random.default_rng(0)
xs = torus.sample(rng, 5)
vs = torus.apply_projection(xs, 0.2 * rng.standard_normal(xs.shape))
gap = np.linalg.norm(
    torus.exp(xs, vs) - (xs + vs + 0.5 * torus.second_fundamental_form(xs, vs, vs)),
    axis=-1)
print("cubic remainder of exp at |v| ~ 0.2:", gap)

print()
print("=== graph z = sin(x) and the bump extension ===")
graph = ms.named_manifold("graph-sine")
field = graph.extend(lambda z: np.ones((z.shape[0], 1)))  # extend the constant 1
for dist in (0.0, 0.10, 0.14, 0.2):
    z = graph.lift(np.array([0.3])) + dist * np.array([0.0, 1.0])
    print(f"  extension of 1 at distance {dist:.2f}: {float(field(z)):.4f} "
          f"(tube radius {graph.tube_radius:.3f})")
print("the extension interpolates smoothly from 1 on the curve to 0 outside")
