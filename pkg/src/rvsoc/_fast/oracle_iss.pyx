include "../oracle_iss.py"
