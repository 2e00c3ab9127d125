import os

from dotenv import load_dotenv

load_dotenv()

FORMAT_VERSION = "1.0"
CAMERA_CONVENTION = "c2w_xr_yd_zf"

# Render clipping range in meters
NEAR = 0.5
FAR = 100.0
STRETCH_THRESHOLD = 0.1

# Full-scale video
FRAMES = 81
HEIGHT = 576
WIDTH = 1024

# Desk-scale synthetic video
SYNTH_FRAMES = 33
SYNTH_HEIGHT = 256
SYNTH_WIDTH = 448
SYNTH_CAMERAS = 8

# Synthetic room enclosing every scene, and how close cameras may come to its surfaces
ROOM_HALF_EXTENT = 8.0
ROOM_HEIGHT = 5.0
CAMERA_MIN_HEIGHT = 0.6
CAMERA_CLEARANCE = 0.5

# Depth values outside this window (meters) never enter the scale/shift fit
ALIGN_MIN_DEPTH = 1e-4
ALIGN_MAX_DEPTH = 1e6

AUGMENT_SCALE_RANGE = (0.8, 1.25)
AUGMENT_SHIFT_RANGE = (-0.2, 0.2)
AUGMENT_RETRIES = 32

# Camera trajectory sampling (meters / degrees)
SUBJECT_HEIGHT = 1.5
START_DISTANCE_RANGE = (2.0, 5.0)
START_PITCH_RANGE = (-10.0, 10.0)
START_YAW_RANGE = (-10.0, 10.0)
FRONT_ARC = 60.0
PATH_LENGTH_RANGE = (0.5, 1.5)
WAYPOINT_COUNT_RANGE = (1, 3)
MAX_PITCH_SPAN = 40.0
MAX_YAW_SPAN = 20.0
MAX_STEP_ROTATION = 5.0
MIN_LOOKAT_DISTANCE = 1.0
TRAJECTORY_RETRIES = 200
MAX_ORBIT_DEGREES = 90.0

FIXED_FOCAL = 500.0

THREADS = int(os.getenv("DEPTHWARP_THREADS", "0")) or (os.cpu_count() or 1)
