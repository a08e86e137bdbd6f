VALUE = 3
