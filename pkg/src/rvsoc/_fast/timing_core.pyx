include "../timing_core.py"
