# divlab package
__app_name__ = "divlab"
