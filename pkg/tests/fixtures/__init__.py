#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试fixtures模块初始化
"""
