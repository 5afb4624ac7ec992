include "../mem_hier.py"
