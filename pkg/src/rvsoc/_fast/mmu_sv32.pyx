include "../mmu_sv32.py"
