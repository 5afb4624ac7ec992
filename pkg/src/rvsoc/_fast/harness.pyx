include "../harness.py"
