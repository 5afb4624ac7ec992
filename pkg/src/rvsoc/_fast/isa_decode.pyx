include "../isa_decode.py"
