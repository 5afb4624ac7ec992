include "../io_devices.py"
