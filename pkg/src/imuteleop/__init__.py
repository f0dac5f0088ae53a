"""IMU-glove teleoperation stack.

Glove packets in over UDP, orientation estimation (median gate, gyro-bias
compensation, complementary finger fusion, Madgwick wrist filter), gesture
recognition, attitude-to-velocity command mapping, a kinematic UAV
simulator and a speed-threshold haptic warning loop, with record/replay of
every stream.
"""

__version__ = "0.1.0"
