# Tools package initialization
