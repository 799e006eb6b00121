"""Carry a disparity map from one frame to the next.

Two fronto-parallel planes, the camera steps sideways by half a baseline.
The near plane moves further across the image than the far one, slides over
it, and leaves a strip behind that nobody saw in the previous frame.
"""
import numpy as np

from vidstereo.geometry import CameraRig, Pose, apply_transform_point, relative_pose, temporal_transform
from vidstereo.warp import DisparityMap, compute_warp_field, softmax_splat, warp_state

np.set_printoptions(precision=2, suppress=True, linewidth=120)

rig = CameraRig(f=60.0, cx=31.5, cy=23.5, b=0.1, width=64, height=48)

# A pixel at disparity d sits at depth f*b/d. A sideways step of one
# baseline shifts every pixel by exactly its disparity.
T = temporal_transform(rig, Pose(np.eye(3), [rig.b, 0, 0]))
print("pixel (10, 20) at d=4 lands on (u, v, d) =", np.round(apply_transform_point(T, 10, 20, 4), 6))

# near plane (d=12) on the left third, far plane (d=4) elsewhere
values = np.where(np.arange(64)[None, :] < 24, 12.0, 4.0).repeat(48, 0)
prev = DisparityMap(values, np.ones_like(values, bool))

prev_pose = Pose.identity()
cur_pose = Pose(np.eye(3), [0.5 * rig.b, 0, 0])
rel = relative_pose(prev_pose, cur_pose)

field = compute_warp_field(rig, rel, prev)
print(f"near plane moves {field.u[0, 0]:.1f} px, far plane moves {field.u[0, 40] - 40:.1f} px")


class State:
    def __init__(self, disparity, hidden):
        self.disparity, self.hidden = disparity, hidden


hidden = np.where(values == 12.0, 1.0, -1.0)[..., None]
d_hat, z_hat = warp_state(State(prev, hidden), rig, rel)
print("\nrow 10 before:", values[10, 20:34])
print("row 10 after: ", d_hat.values[10, 20:34])
print("holes in row 10 at columns", np.flatnonzero(~d_hat.mask[10]))

# The softmax weight exp(beta * d') decides collisions. With a small beta the
# near and far surfaces blend; a large beta approaches a z-buffer.
for beta in (0.01, 0.1, 1, 10):
    out, _ = softmax_splat(values[..., None], field, field.d, beta=beta)
    print(f"beta={beta:>4}: column 27 gets d={out[10, 27, 0]:.2f}")
