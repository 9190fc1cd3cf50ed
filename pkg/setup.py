from setuptools import setup, find_packages

setup(
    name="fairrewire",
    version="0.1",
    packages=find_packages(include=["tools", "utils"]),
    py_modules=["cli", "server"],
)
