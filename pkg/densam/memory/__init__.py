"""
Energy landscapes of Dense Associative Memories

kernels -> patterns -> energy -> retrieval -> emergence
"""
