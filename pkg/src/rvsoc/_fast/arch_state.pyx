include "../arch_state.py"
