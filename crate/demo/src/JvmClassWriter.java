package org.example.jvm;

import java.util.ArrayList;
import java.util.List;

/**
 * Serialises an in-memory class model into class-file bytes.
 */
public class JvmClassWriter {
    private final List<String> warnings = new ArrayList<>();
    private final boolean debugInfo;
    private int classesWritten;

    public JvmClassWriter(boolean debugInfo) {
        this.debugInfo = debugInfo;
    }

    public List<String> warnings() {
        return warnings;
    }

    private void writeAnnotations(AnnotationSink sink, List<JvmAnnotation> annotations) {
        for (JvmAnnotation annotation : annotations) {
            AnnotationVisitor av = sink.visitAnnotation(annotation.descriptor(), annotation.isVisible());
            for (JvmAnnotation.Element element : annotation.elements()) {
                av.visit(element.name(), element.value());
            }
            av.visitEnd();
        }
    }

    private void writeCode(MethodVisitor mv, JvmMethod method) {
        if (method.isAbstract()) {
            return;
        }
        mv.visitCode();
        for (Instruction insn : method.instructions()) {
            insn.accept(mv);
        }
        if (debugInfo) {
            for (LocalVariable local : method.localVariables()) {
                mv.visitLocalVariable(local.name(), local.descriptor(), null, local.start(), local.end(), local.index());
            }
        }
        mv.visitMaxs(0, 0);
    }

    private static String internalName(String binaryName) {
        return binaryName.replace('.', '/');
    }

    public byte[] writeJvmClass(JvmClass jvmClass) {
        ClassWriter cw = new ClassWriter(ClassWriter.COMPUTE_FRAMES);
        String superName = jvmClass.superClass() == null
                ? "java/lang/Object"
                : internalName(jvmClass.superClass());

        String[] interfaces = new String[jvmClass.interfaces().size()];
        for (int i = 0; i < interfaces.length; i++) {
            interfaces[i] = internalName(jvmClass.interfaces().get(i));
        }
        cw.visit(jvmClass.version(), jvmClass.access(), internalName(jvmClass.name()),
                jvmClass.signature(), superName, interfaces);
        if (jvmClass.sourceFile() != null) {
            cw.visitSource(jvmClass.sourceFile(), null);
        }
        writeAnnotations(cw, jvmClass.annotations());

        for (JvmField field : jvmClass.fields()) {
            if (field.isSynthetic() && !debugInfo) {
                warnings.add("skipping synthetic field " + field.name());
                continue;
            }
            FieldVisitor fv = cw.visitField(field.access(), field.name(), field.descriptor(),
                    field.signature(), field.constantValue());
            writeAnnotations(fv, field.annotations());
            fv.visitEnd();
        }

        for (JvmClass inner : jvmClass.innerClasses()) {
            cw.visitInnerClass(internalName(inner.name()), internalName(jvmClass.name()),
                    inner.simpleName(), inner.access());
        }

        for (JvmMethod method : jvmClass.methods()) {
            MethodVisitor mv = cw.visitMethod(method.access(), method.name(), method.descriptor(),
                    method.signature(), method.exceptions());
            writeAnnotations(mv, method.annotations());
            writeCode(mv, method);
        }

        cw.visitEnd();
        classesWritten++;
        return cw.toByteArray();
    }
}
