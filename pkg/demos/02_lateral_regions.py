"""Lateral regions, the safety rule, and arrival prediction.

One ego vehicle observes three neighbors. We print the induced lateral
partition with its acceleration estimates, clamp a desired target through
the safety rule, and predict how long the resulting maneuver takes.
"""
from lanefree import (IdmParams, RoadConfig, VehicleState, build_regions,
                      predict_arrival, safe_region)

road = RoadConfig(length=1000.0, width=10.2)
idm = IdmParams()

ego = VehicleState(id=1, x=100.0, y=2.0, v_x=32.0, v_y=0.0, v_d=35.0,
                   y_d=2.0)
slow_ahead = VehicleState(id=2, x=118.0, y=5.0, v_x=24.0, v_y=0.0, v_d=24.0,
                          y_d=5.0)
drifting = VehicleState(id=3, x=126.0, y=8.4, v_x=30.0, v_y=-0.8, v_d=30.0,
                        y_d=7.0)
tailgater = VehicleState(id=4, x=88.0, y=2.2, v_x=33.0, v_y=0.0, v_d=35.0,
                         y_d=2.2)

regions = build_regions(ego, [slow_ahead, drifting], [tailgater],
                        obs_x=30.0, y_safe=0.2, t_y=0.4, road=road, idm=idm)

print(f"reachable band: [{regions.band[0]:.2f}, {regions.band[1]:.2f}] m")
print(f"{'idx':>4} {'span (m)':>16} {'leader':>7} {'follower':>9} "
      f"{'a_down':>8} {'a_up':>7}")
for r in regions.regions:
    print(f"{r.index:>4} [{r.y_low:6.2f}, {r.y_high:6.2f}] "
          f"{str(r.leader_id or '-'):>7} {str(r.follower_id or '-'):>9} "
          f"{r.a_down:8.2f} {r.a_up:7.2f}")

target = 8.6  # wants to move far left, across the slow vehicle's region
idx, y_d = safe_region(regions, target, b_safe=idm.b_safe, y_thr=road.y_thr)
print(f"\nrequested y* = {target:.1f} m -> safe region {idx}, "
      f"clamped target y_d = {y_d:.2f} m")

t = predict_arrival(ego.y, ego.v_y, y_d, k_p=1.44, k_d=2.4, dt=0.2,
                    y_e=0.01, horizon_steps=30)
print(f"predicted time to reach the clamped target: {t:.1f} s "
      "(capped at the reassignment window)")
